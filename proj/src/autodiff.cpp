#include "svsmc/autodiff.hpp"

#include <cmath>
#include <utility>

namespace svsmc::ad {

namespace {

void axpy_into(Mat& dst, const Mat& src, double scale = 1.0) {
    if (dst.size() == 0) dst = Mat(src.rows(), src.cols());
    for (size_t i = 0; i < dst.size(); ++i) dst.vec()[i] += scale * src.vec()[i];
}

// Lower triangle with halved diagonal, zero above; the Phi map of the
// Cholesky pullback.
Mat phi_lower(const Mat& A) {
    Mat P(A.rows(), A.cols());
    for (int i = 0; i < A.rows(); ++i) {
        for (int j = 0; j < i; ++j) P(i, j) = A(i, j);
        P(i, i) = 0.5 * A(i, i);
    }
    return P;
}

}  // namespace

int Tape::push(Mat v, bool needs_grad, std::function<void(Tape&, int)> back) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Mat v) { return push(std::move(v), true); }
int Tape::constant(Mat v) { return push(std::move(v), false); }

void Tape::clear() { nodes_.clear(); }

void Tape::backward(int root) {
    if (nodes_[root].val.size() != 1)
        throw std::invalid_argument("backward: root must be scalar");
    for (auto& n : nodes_) {
        n.grad = Mat(n.val.rows(), n.val.cols());
    }
    nodes_[root].grad(0, 0) = 1.0;
    for (int id = root; id >= 0; --id) {
        auto& n = nodes_[id];
        if (n.back && n.needs_grad) n.back(*this, id);
    }
}

int Tape::add(int a, int b) {
    Mat v = val(a);
    axpy_into(v, val(b));
    return push(std::move(v), needs(a) || needs(b), [a, b](Tape& t, int self) {
        if (t.needs(a)) axpy_into(t.grad_ref(a), t.grad(self));
        if (t.needs(b)) axpy_into(t.grad_ref(b), t.grad(self));
    });
}

int Tape::sub(int a, int b) {
    Mat v = val(a);
    axpy_into(v, val(b), -1.0);
    return push(std::move(v), needs(a) || needs(b), [a, b](Tape& t, int self) {
        if (t.needs(a)) axpy_into(t.grad_ref(a), t.grad(self));
        if (t.needs(b)) axpy_into(t.grad_ref(b), t.grad(self), -1.0);
    });
}

int Tape::mul_elem(int a, int b) {
    Mat v = val(a);
    for (size_t i = 0; i < v.size(); ++i) v.vec()[i] *= val(b).vec()[i];
    return push(std::move(v), needs(a) || needs(b), [a, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.needs(a)) {
            Mat& ga = t.grad_ref(a);
            for (size_t i = 0; i < g.size(); ++i) ga.vec()[i] += g.vec()[i] * t.val(b).vec()[i];
        }
        if (t.needs(b)) {
            Mat& gb = t.grad_ref(b);
            for (size_t i = 0; i < g.size(); ++i) gb.vec()[i] += g.vec()[i] * t.val(a).vec()[i];
        }
    });
}

int Tape::affine_scalar(int a, double alpha, double beta) {
    Mat v = val(a);
    for (double& x : v.vec()) x = alpha * x + beta;
    return push(std::move(v), needs(a), [a, alpha](Tape& t, int self) {
        axpy_into(t.grad_ref(a), t.grad(self), alpha);
    });
}

int Tape::exp_elem(int a) {
    Mat v = val(a);
    for (double& x : v.vec()) x = std::exp(x);
    return push(std::move(v), needs(a), [a](Tape& t, int self) {
        const Mat& g = t.grad(self);
        const Mat& out = t.val(self);
        Mat& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.size(); ++i) ga.vec()[i] += g.vec()[i] * out.vec()[i];
    });
}

int Tape::matmul(int a, int b) {
    Mat v = svsmc::matmul(val(a), val(b));
    return push(std::move(v), needs(a) || needs(b), [a, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.needs(a)) axpy_into(t.grad_ref(a), matmul_nt(g, t.val(b)));
        if (t.needs(b)) axpy_into(t.grad_ref(b), matmul_tn(t.val(a), g));
    });
}

int Tape::transpose(int a) {
    return push(svsmc::transpose(val(a)), needs(a), [a](Tape& t, int self) {
        axpy_into(t.grad_ref(a), svsmc::transpose(t.grad(self)));
    });
}

int Tape::cholesky(int a) {
    Mat L = svsmc::cholesky(val(a));
    return push(std::move(L), needs(a), [a](Tape& t, int self) {
        if (!t.needs(a)) return;
        const Mat& L = t.val(self);
        // Murray (2016): Sigma_bar = P(L^{-T} Phi(L^T G) L^{-1}) symmetrized.
        Mat P = phi_lower(matmul_tn_lowerA(L, t.grad(self)));
        Mat U = svsmc::solve_lower_transposed(L, P);
        Mat C = svsmc::solve_right_lower(U, L);
        Mat& ga = t.grad_ref(a);
        if (ga.size() == 0) ga = Mat(C.rows(), C.cols());
        for (int i = 0; i < C.rows(); ++i)
            for (int j = 0; j < C.cols(); ++j) ga(i, j) += 0.5 * (C(i, j) + C(j, i));
    });
}

int Tape::solve_lower(int l, int b, bool rhs_lower) {
    Mat X = rhs_lower ? svsmc::solve_lower_tri_rhs(val(l), val(b))
                      : svsmc::solve_lower(val(l), val(b));
    return push(std::move(X), needs(l) || needs(b), [l, b, rhs_lower](Tape& t, int self) {
        const Mat& L = t.val(l);
        Mat gb = svsmc::solve_lower_transposed(L, t.grad(self));
        if (t.needs(l)) {
            Mat& acc = t.grad_ref(l);
            if (acc.size() == 0) acc = Mat(L.rows(), L.cols());
            matmul_nt_lower_acc(gb, t.val(self), acc, -1.0, rhs_lower);
        }
        if (t.needs(b)) axpy_into(t.grad_ref(b), gb);
    });
}

int Tape::solve_lower_transposed(int l, int b) {
    Mat X = svsmc::solve_lower_transposed(val(l), val(b));
    return push(std::move(X), needs(l) || needs(b), [l, b](Tape& t, int self) {
        const Mat& L = t.val(l);
        Mat gb = svsmc::solve_lower(L, t.grad(self));
        if (t.needs(l)) {
            Mat& acc = t.grad_ref(l);
            if (acc.size() == 0) acc = Mat(L.rows(), L.cols());
            matmul_nt_lower_acc(t.val(self), gb, acc, -1.0, false);
        }
        if (t.needs(b)) axpy_into(t.grad_ref(b), gb);
    });
}

int Tape::make_lower(int off_packed, int log_diag, int n) {
    Mat S(n, n);
    const Mat& off = val(off_packed);
    const Mat& ld = val(log_diag);
    size_t k = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < i; ++j) S(i, j) = off.vec()[k++];
        S(i, i) = std::exp(ld.vec()[i]);
    }
    return push(std::move(S), needs(off_packed) || needs(log_diag),
                [off_packed, log_diag, n](Tape& t, int self) {
                    const Mat& g = t.grad(self);
                    const Mat& S = t.val(self);
                    Mat& goff = t.grad_ref(off_packed);
                    Mat& gld = t.grad_ref(log_diag);
                    size_t k = 0;
                    for (int i = 0; i < n; ++i) {
                        for (int j = 0; j < i; ++j) goff.vec()[k++] += g(i, j);
                        gld.vec()[i] += g(i, i) * S(i, i);
                    }
                });
}

int Tape::row_sumsq(int a) {
    const Mat& A = val(a);
    Mat v(A.rows(), 1);
    for (int i = 0; i < A.rows(); ++i) {
        double s = 0.0;
        const double* r = A.row(i);
        for (int j = 0; j < A.cols(); ++j) s += r[j] * r[j];
        v(i, 0) = s;
    }
    return push(std::move(v), needs(a), [a](Tape& t, int self) {
        const Mat& A = t.val(a);
        const Mat& g = t.grad(self);
        Mat& ga = t.grad_ref(a);
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j) ga(i, j) += 2.0 * A(i, j) * g(i, 0);
    });
}

int Tape::col_sumsq(int a) {
    const Mat& A = val(a);
    Mat v(A.cols(), 1);
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.cols(); ++j) v(j, 0) += A(i, j) * A(i, j);
    return push(std::move(v), needs(a), [a](Tape& t, int self) {
        const Mat& A = t.val(a);
        const Mat& g = t.grad(self);
        Mat& ga = t.grad_ref(a);
        for (int i = 0; i < A.rows(); ++i)
            for (int j = 0; j < A.cols(); ++j) ga(i, j) += 2.0 * A(i, j) * g(j, 0);
    });
}

int Tape::frobenius_sq(int a) {
    Mat v(1, 1);
    v(0, 0) = svsmc::frobenius_sq(val(a));
    return push(std::move(v), needs(a), [a](Tape& t, int self) {
        axpy_into(t.grad_ref(a), t.val(a), 2.0 * t.grad(self)(0, 0));
    });
}

int Tape::log_diag_sum(int a) {
    const Mat& A = val(a);
    Mat v(1, 1);
    for (int i = 0; i < A.rows(); ++i) v(0, 0) += std::log(A(i, i));
    return push(std::move(v), needs(a), [a](Tape& t, int self) {
        const double g = t.grad(self)(0, 0);
        const Mat& A = t.val(a);
        Mat& ga = t.grad_ref(a);
        for (int i = 0; i < A.rows(); ++i) ga(i, i) += g / A(i, i);
    });
}

int Tape::sum(int a) {
    Mat v(1, 1);
    for (double x : val(a).vec()) v(0, 0) += x;
    return push(std::move(v), needs(a), [a](Tape& t, int self) {
        const double g = t.grad(self)(0, 0);
        Mat& ga = t.grad_ref(a);
        for (double& x : ga.vec()) x += g;
    });
}

int Tape::dense_layer(int x, int w, int b) {
    Mat v = svsmc::matmul(val(x), val(w));
    const Mat& bias = val(b);
    for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < v.cols(); ++j) v(i, j) += bias(0, j);
    return push(std::move(v), needs(x) || needs(w) || needs(b), [x, w, b](Tape& t, int self) {
        const Mat& g = t.grad(self);
        if (t.needs(x)) axpy_into(t.grad_ref(x), matmul_nt(g, t.val(w)));
        if (t.needs(w)) axpy_into(t.grad_ref(w), matmul_tn(t.val(x), g));
        if (t.needs(b)) {
            Mat& gb = t.grad_ref(b);
            for (int i = 0; i < g.rows(); ++i)
                for (int j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
        }
    });
}

int Tape::leaky_relu(int a, double slope) {
    Mat v = val(a);
    for (double& x : v.vec())
        if (x < 0.0) x *= slope;
    return push(std::move(v), needs(a), [a, slope](Tape& t, int self) {
        const Mat& g = t.grad(self);
        const Mat& in = t.val(a);
        Mat& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.size(); ++i)
            ga.vec()[i] += g.vec()[i] * (in.vec()[i] >= 0.0 ? 1.0 : slope);
    });
}

int Tape::sigmoid(int a) {
    Mat v = val(a);
    for (double& x : v.vec()) x = 1.0 / (1.0 + std::exp(-x));
    return push(std::move(v), needs(a), [a](Tape& t, int self) {
        const Mat& g = t.grad(self);
        const Mat& s = t.val(self);
        Mat& ga = t.grad_ref(a);
        for (size_t i = 0; i < g.size(); ++i)
            ga.vec()[i] += g.vec()[i] * s.vec()[i] * (1.0 - s.vec()[i]);
    });
}

int Tape::binomial_log_lik(int f, std::vector<int> successes, std::vector<int> trials) {
    const Mat& fv = val(f);
    Mat v(1, 1);
    for (int i = 0; i < fv.rows(); ++i)
        v(0, 0) += binomial_log_pmf(successes[i], trials[i], fv(i, 0));
    return push(std::move(v), needs(f),
                [f, s = std::move(successes), m = std::move(trials)](Tape& t, int self) {
                    const double g = t.grad(self)(0, 0);
                    const Mat& fv = t.val(f);
                    Mat& gf = t.grad_ref(f);
                    for (int i = 0; i < fv.rows(); ++i) {
                        double p = fv(i, 0);
                        if (p <= kProbClip || p >= 1.0 - kProbClip) continue;
                        gf(i, 0) += g * (s[i] / p - (m[i] - s[i]) / (1.0 - p));
                    }
                });
}

int Tape::gh_binomial_log_lik(int mean, int var, std::vector<int> successes,
                              std::vector<int> trials, const GaussHermite& gh) {
    const Mat& mu = val(mean);
    const Mat& vr = val(var);
    const int n = mu.rows();
    const int q = static_cast<int>(gh.nodes.size());
    const double inv_sqrt_pi = 0.56418958354775628695;
    Mat v(1, 1);
    for (int i = 0; i < n; ++i) {
        const double lc = log_binomial_coefficient(trials[i], successes[i]);
        const double sd2 = std::sqrt(2.0 * std::max(vr(i, 0), 1e-12));
        double acc = 0.0;
        for (int j = 0; j < q; ++j) {
            double g = mu(i, 0) + sd2 * gh.nodes[j];
            double p = normal_cdf(g);
            if (p < kProbClip) p = kProbClip;
            if (p > 1.0 - kProbClip) p = 1.0 - kProbClip;
            acc += gh.weights[j] *
                   (lc + successes[i] * std::log(p) + (trials[i] - successes[i]) * std::log1p(-p));
        }
        v(0, 0) += inv_sqrt_pi * acc;
    }
    return push(
        std::move(v), needs(mean) || needs(var),
        [mean, var, s = std::move(successes), m = std::move(trials), &gh](Tape& t, int self) {
            const double gout = t.grad(self)(0, 0);
            const Mat& mu = t.val(mean);
            const Mat& vr = t.val(var);
            const int n = mu.rows();
            const int q = static_cast<int>(gh.nodes.size());
            const double inv_sqrt_pi = 0.56418958354775628695;
            for (int i = 0; i < n; ++i) {
                const double vf = std::max(vr(i, 0), 1e-12);
                const double sd2 = std::sqrt(2.0 * vf);
                double dmu = 0.0, dvar = 0.0;
                for (int j = 0; j < q; ++j) {
                    double g = mu(i, 0) + sd2 * gh.nodes[j];
                    double p = normal_cdf(g);
                    if (p <= kProbClip || p >= 1.0 - kProbClip) continue;
                    double pdf = normal_pdf(g);
                    double dh = pdf * (s[i] / p - (m[i] - s[i]) / (1.0 - p));
                    dmu += gh.weights[j] * dh;
                    dvar += gh.weights[j] * dh * gh.nodes[j] / sd2;
                }
                if (t.needs(mean)) t.grad_ref(mean)(i, 0) += gout * inv_sqrt_pi * dmu;
                if (t.needs(var) && vr(i, 0) > 1e-12)
                    t.grad_ref(var)(i, 0) += gout * inv_sqrt_pi * dvar;
            }
        });
}

int Tape::gaussian_kl(int mu, int rho, std::vector<double> prior_center,
                      std::vector<double> prior_std) {
    const Mat& m = val(mu);
    const Mat& r = val(rho);
    Mat v(1, 1);
    for (size_t i = 0; i < m.size(); ++i) {
        const double s0 = prior_std[i];
        const double s = std::exp(r.vec()[i]);
        const double dm = m.vec()[i] - prior_center[i];
        v(0, 0) += std::log(s0) - r.vec()[i] + (s * s + dm * dm) / (2.0 * s0 * s0) - 0.5;
    }
    return push(std::move(v), needs(mu) || needs(rho),
                [mu, rho, c = std::move(prior_center), s0 = std::move(prior_std)](Tape& t,
                                                                                  int self) {
                    const double g = t.grad(self)(0, 0);
                    const Mat& m = t.val(mu);
                    const Mat& r = t.val(rho);
                    Mat& gm = t.grad_ref(mu);
                    Mat& gr = t.grad_ref(rho);
                    for (size_t i = 0; i < m.size(); ++i) {
                        const double v0 = s0[i] * s0[i];
                        const double s = std::exp(r.vec()[i]);
                        if (t.needs(mu)) gm.vec()[i] += g * (m.vec()[i] - c[i]) / v0;
                        if (t.needs(rho)) gr.vec()[i] += g * (s * s / v0 - 1.0);
                    }
                });
}

int Tape::rbf_kernel(int x, int y, int log_ls, int log_var, double jitter_rel, bool x_is_y) {
    const Mat& X = val(x);
    const Mat& Y = val(y);
    const Mat& ls = val(log_ls);
    const int n = X.rows(), p = Y.rows(), d = X.cols();
    const double var = std::exp(val(log_var)(0, 0));
    std::vector<double> inv_l2(d);
    for (int k = 0; k < d; ++k) inv_l2[k] = std::exp(-2.0 * ls.vec()[k]);
    Mat K(n, p);
    for (int i = 0; i < n; ++i) {
        const double* xi = X.row(i);
        double* ki = K.row(i);
        for (int j = 0; j < p; ++j) {
            const double* yj = Y.row(j);
            double q = 0.0;
            for (int k = 0; k < d; ++k) {
                double diff = xi[k] - yj[k];
                q += diff * diff * inv_l2[k];
            }
            ki[j] = var * std::exp(-0.5 * q);
        }
    }
    if (x_is_y)
        for (int i = 0; i < n; ++i) K(i, i) += jitter_rel * var;
    bool ng = needs(x) || needs(y) || needs(log_ls) || needs(log_var);
    return push(std::move(K), ng, [x, y, log_ls, log_var, jitter_rel, x_is_y](Tape& t, int self) {
        const Mat& X = t.val(x);
        const Mat& Y = t.val(y);
        const Mat& ls = t.val(log_ls);
        const Mat& K = t.val(self);
        const Mat& G = t.grad(self);
        const int n = X.rows(), p = Y.rows(), d = X.cols();
        const double var = std::exp(t.val(log_var)(0, 0));
        std::vector<double> inv_l2(d);
        for (int k = 0; k < d; ++k) inv_l2[k] = std::exp(-2.0 * ls.vec()[k]);
        double gvar = 0.0;
        std::vector<double> gls(d, 0.0);
        const bool nx = t.needs(x), ny = t.needs(y);
        for (int i = 0; i < n; ++i) {
            const double* xi = X.row(i);
            for (int j = 0; j < p; ++j) {
                const double gij = G(i, j);
                if (gij == 0.0) continue;
                const double* yj = Y.row(j);
                // pure exponential part (jitter excluded off the diagonal term)
                double kij = K(i, j);
                if (x_is_y && i == j) kij -= jitter_rel * var;
                gvar += gij * K(i, j);  // d/dlogvar includes the jitter part
                const double w = gij * kij;
                for (int k = 0; k < d; ++k) {
                    const double diff = xi[k] - yj[k];
                    const double sc = diff * inv_l2[k];
                    gls[k] += w * diff * sc;
                    if (nx) t.grad_ref(x)(i, k) -= w * sc;
                    if (ny) t.grad_ref(y)(j, k) += w * sc;
                }
            }
        }
        if (t.needs(log_var)) t.grad_ref(log_var)(0, 0) += gvar;
        if (t.needs(log_ls)) {
            Mat& gl = t.grad_ref(log_ls);
            for (int k = 0; k < d; ++k) gl.vec()[k] += gls[k];
        }
    });
}

}  // namespace svsmc::ad
