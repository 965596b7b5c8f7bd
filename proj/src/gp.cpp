#include "svsmc/gp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "svsmc/autodiff.hpp"
#include "svsmc/math.hpp"
#include "svsmc/optim.hpp"
#include "svsmc/rng.hpp"

namespace svsmc {

Mat kernel_matrix(const RbfKernel& kernel, const Mat& X, const Mat& Y, double jitter_rel,
                  bool x_is_y) {
    if (X.cols() != Y.cols()) throw std::invalid_argument("kernel_matrix: dimension mismatch");
    if (static_cast<int>(kernel.log_lengthscale.size()) != X.cols())
        throw std::invalid_argument("kernel_matrix: lengthscale dimension mismatch");
    const int n = X.rows(), p = Y.rows(), d = X.cols();
    const double var = std::exp(kernel.log_variance);
    std::vector<double> inv_l2(d);
    for (int k = 0; k < d; ++k) inv_l2[k] = std::exp(-2.0 * kernel.log_lengthscale[k]);
    Mat K(n, p);
    for (int i = 0; i < n; ++i) {
        const double* xi = X.row(i);
        double* ki = K.row(i);
        for (int j = 0; j < p; ++j) {
            const double* yj = Y.row(j);
            double q = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = xi[k] - yj[k];
                q += diff * diff * inv_l2[k];
            }
            ki[j] = var * std::exp(-0.5 * q);
        }
    }
    if (x_is_y)
        for (int i = 0; i < n; ++i) K(i, i) += jitter_rel * var;
    return K;
}

Mat GpVariationalState::chol_factor() const {
    const int m = inducing_count();
    Mat S(m, m);
    size_t k = 0;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < i; ++j) S(i, j) = chol_off.vec()[k++];
        S(i, i) = std::exp(chol_log_diag.vec()[i]);
    }
    return S;
}

GpMarginals q_g_marginals(const GpVariationalState& state, const Mat& X) {
    const int n = X.rows();
    Mat Kmm = kernel_matrix(state.kernel, state.inducing, state.inducing, state.jitter_rel, true);
    Mat L;
    try {
        L = cholesky(Kmm);
    } catch (const FactorizationError&) {
        throw FactorizationError(
            "q_g_marginals: K_mm factorization failed (jitter too small or duplicate inducing "
            "points)");
    }
    Mat Kmx = kernel_matrix(state.kernel, state.inducing, X, state.jitter_rel, false);
    Mat B = solve_lower(L, Kmx);                   // m x n
    Mat e = solve_lower(L, state.eta);             // m x 1
    Mat C = solve_lower_transposed(L, B);                    // m x n, A = C^T
    Mat AS = matmul_tn(C, state.chol_factor());  // n x m
    const double kdiag = std::exp(state.kernel.log_variance) * (1.0 + state.jitter_rel);

    GpMarginals out;
    out.mean.resize(n);
    out.var.resize(n);
    for (int i = 0; i < n; ++i) {
        double mu = 0.0;
        for (int k = 0; k < B.rows(); ++k) mu += B(k, i) * e(k, 0);
        double vs = 0.0;
        const double* as = AS.row(i);
        for (int k = 0; k < AS.cols(); ++k) vs += as[k] * as[k];
        double vb = 0.0;
        for (int k = 0; k < B.rows(); ++k) vb += B(k, i) * B(k, i);
        out.mean[i] = mu;
        out.var[i] = std::max(kdiag + vs - vb, 1e-12);
    }
    return out;
}

void q_g_full(const GpVariationalState& state, const Mat& X, Mat& mean_out, Mat& cov_out) {
    Mat Kmm = kernel_matrix(state.kernel, state.inducing, state.inducing, state.jitter_rel, true);
    Mat L = cholesky(Kmm);
    Mat Kmx = kernel_matrix(state.kernel, state.inducing, X, state.jitter_rel, false);
    Mat Kxx = kernel_matrix(state.kernel, X, X, state.jitter_rel, true);
    Mat B = solve_lower(L, Kmx);
    Mat e = solve_lower(L, state.eta);
    Mat C = solve_lower_transposed(L, B);
    Mat AS = matmul_tn(C, state.chol_factor());  // n x m
    mean_out = matmul_tn(B, e);                  // n x 1
    cov_out = Kxx;
    Mat BtB = matmul_tn(B, B);
    Mat ASASt = matmul_nt(AS, AS);
    for (int i = 0; i < cov_out.rows(); ++i)
        for (int j = 0; j < cov_out.cols(); ++j) cov_out(i, j) += ASASt(i, j) - BtB(i, j);
}

double expected_log_lik(double mean, double var, int successes, int trials, int n_nodes) {
    if (!(var > 0.0)) throw std::invalid_argument("expected_log_lik: var must be positive");
    GaussHermite gh(n_nodes);
    const double inv_sqrt_pi = 0.56418958354775628695;
    const double sd2 = std::sqrt(2.0 * var);
    const double lc = log_binomial_coefficient(trials, successes);
    double acc = 0.0;
    for (size_t j = 0; j < gh.nodes.size(); ++j) {
        double g = mean + sd2 * gh.nodes[j];
        double p = normal_cdf(g);
        if (p < kProbClip) p = kProbClip;
        if (p > 1.0 - kProbClip) p = 1.0 - kProbClip;
        acc += gh.weights[j] *
               (lc + successes * std::log(p) + (trials - successes) * std::log1p(-p));
    }
    return inv_sqrt_pi * acc;
}

double gp_kl_to_prior(const GpVariationalState& state) {
    const int m = state.inducing_count();
    Mat Kmm = kernel_matrix(state.kernel, state.inducing, state.inducing, state.jitter_rel, true);
    Mat L = cholesky(Kmm);
    Mat S = state.chol_factor();
    Mat Ls = solve_lower_tri_rhs(L, S);
    Mat e = solve_lower(L, state.eta);
    double logdet_k = 0.0, logdet_s = 0.0;
    for (int i = 0; i < m; ++i) {
        logdet_k += std::log(L(i, i));
        logdet_s += state.chol_log_diag.vec()[i];
    }
    return 0.5 * (frobenius_sq(Ls) + frobenius_sq(e) - m) + logdet_k - logdet_s;
}

namespace {

struct GpGraph {
    ad::Tape tape;
    int eta, chol_off, chol_log_diag, inducing, log_ls, log_var;
    int elbo;
};

// Shared tape construction for ELBO value and gradients; the value path and
// the gradient path must agree exactly for finite-difference checks.
void build_gp_graph(GpGraph& g, const GpVariationalState& state, const Mat& X,
                    const std::vector<int>& successes, const std::vector<int>& trials,
                    int n_total, const GaussHermite& gh) {
    const int m = state.inducing_count();
    const int n = X.rows();
    if (n == 0) throw std::invalid_argument("elbo_gp: batch must be nonempty");
    ad::Tape& t = g.tape;
    t.clear();
    g.eta = t.leaf(state.eta);
    g.chol_off = t.leaf(state.chol_off);
    g.chol_log_diag = t.leaf(state.chol_log_diag);
    g.inducing = t.leaf(state.inducing);
    Mat ls(static_cast<int>(state.kernel.log_lengthscale.size()), 1);
    ls.vec() = state.kernel.log_lengthscale;
    g.log_ls = t.leaf(ls);
    Mat lv(1, 1);
    lv(0, 0) = state.kernel.log_variance;
    g.log_var = t.leaf(lv);

    int S = t.make_lower(g.chol_off, g.chol_log_diag, m);
    int Kmm = t.rbf_kernel(g.inducing, g.inducing, g.log_ls, g.log_var, state.jitter_rel, true);
    int L = t.cholesky(Kmm);
    int Xc = t.constant(X);
    int Kmx = t.rbf_kernel(g.inducing, Xc, g.log_ls, g.log_var, 0.0, false);
    int B = t.solve_lower(L, Kmx);
    int e = t.solve_lower(L, g.eta);
    int C = t.solve_lower_transposed(L, B);
    int AS = t.matmul(t.transpose(C), S);  // n x m
    // marginal means: B^T e
    int mean = t.matmul(t.transpose(B), e);  // n x 1
    // k(x,x) diagonal: exp(log_var) * (1 + jitter)
    int kdiag = t.affine_scalar(t.exp_elem(g.log_var), 1.0 + state.jitter_rel, 0.0);
    // broadcast to n x 1 through a constant ones vector
    int ones = t.constant(Mat(n, 1, 1.0));
    int kvec = t.matmul(ones, kdiag);
    int var = t.add(kvec, t.sub(t.row_sumsq(AS), t.col_sumsq(B)));
    int ell = t.gh_binomial_log_lik(mean, var, successes, trials, gh);

    int ls_frob = t.frobenius_sq(t.solve_lower(L, S, true));
    int e_frob = t.frobenius_sq(e);
    int ld = t.sub(t.log_diag_sum(L), t.log_diag_sum(S));
    int kl = t.affine_scalar(t.add(t.add(ls_frob, e_frob), t.affine_scalar(ld, 2.0, -m)), 0.5, 0.0);

    const double scale = static_cast<double>(n_total) / n;
    g.elbo = t.sub(t.affine_scalar(ell, scale, 0.0), kl);
}

}  // namespace

double elbo_gp(const GpVariationalState& state, const Mat& X, const std::vector<int>& successes,
               const std::vector<int>& trials, int n_total, int n_nodes) {
    GaussHermite gh(n_nodes);
    GpGraph g;
    build_gp_graph(g, state, X, successes, trials, n_total, gh);
    return g.tape.val(g.elbo)(0, 0);
}

GpGradients elbo_gp_with_gradients(const GpVariationalState& state, const Mat& X,
                                   const std::vector<int>& successes,
                                   const std::vector<int>& trials, int n_total, int n_nodes) {
    GaussHermite gh(n_nodes);
    GpGraph g;
    build_gp_graph(g, state, X, successes, trials, n_total, gh);
    g.tape.backward(g.elbo);
    GpGradients out;
    out.value = g.tape.val(g.elbo)(0, 0);
    out.eta = g.tape.grad(g.eta);
    out.chol_off = g.tape.grad(g.chol_off);
    out.chol_log_diag = g.tape.grad(g.chol_log_diag);
    out.inducing = g.tape.grad(g.inducing);
    out.log_lengthscale = g.tape.grad(g.log_ls);
    out.log_variance = g.tape.grad(g.log_var)(0, 0);
    return out;
}

Mat thetas_to_mat(const std::vector<std::vector<double>>& thetas) {
    if (thetas.empty()) return Mat();
    Mat X(static_cast<int>(thetas.size()), static_cast<int>(thetas[0].size()));
    for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < X.cols(); ++j) X(i, j) = thetas[i][j];
    return X;
}

GpPosterior train_gp(const Dataset& train, const GpConfig& config) {
    if (train.role != DatasetRole::Train) throw std::invalid_argument("train_gp: dataset role must be train");
    if (!train.scaled) throw std::invalid_argument("train_gp: dataset must be scaled");
    train.check_invariants();
    const auto t0 = std::chrono::steady_clock::now();
    const int n = train.size();
    const int d = train.dim();
    const int m = std::min(config.max_inducing, n);

    Rng rng(config.seed, tag_hash("gp-train"));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[static_cast<int>(rng.below(static_cast<std::uint32_t>(i + 1)))]);

    GpVariationalState state;
    state.jitter_rel = config.jitter_rel;
    state.kernel.log_lengthscale.assign(d, 0.0);
    state.kernel.log_variance = 0.0;
    state.inducing = Mat(m, d);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < d; ++j) state.inducing(i, j) = train.points[perm[i]].theta[j];
    state.eta = Mat(m, 1);
    // Start q at the prior: S = chol(K_mm) makes the KL vanish initially.
    Mat L0 = cholesky(kernel_matrix(state.kernel, state.inducing, state.inducing,
                                    state.jitter_rel, true));
    state.chol_off = Mat(m * (m - 1) / 2, 1);
    state.chol_log_diag = Mat(m, 1);
    {
        size_t k = 0;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < i; ++j) state.chol_off.vec()[k++] = L0(i, j);
            state.chol_log_diag.vec()[i] = std::log(L0(i, i));
        }
    }

    GpPosterior post;
    post.reference_kernel = state.kernel;
    post.scaling = train.scaling;
    post.training_trials = train.trials();
    post.training_inputs = Mat(n, d);
    post.training_successes.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) post.training_inputs(i, j) = train.points[i].theta[j];
        post.training_successes[i] = train.points[i].successes;
    }

    // Flat parameter vector: [eta | chol_off | chol_log_diag | Z | log_ls | log_var]
    auto pack = [&](std::vector<double>& flat) {
        flat.clear();
        flat.insert(flat.end(), state.eta.vec().begin(), state.eta.vec().end());
        flat.insert(flat.end(), state.chol_off.vec().begin(), state.chol_off.vec().end());
        flat.insert(flat.end(), state.chol_log_diag.vec().begin(), state.chol_log_diag.vec().end());
        flat.insert(flat.end(), state.inducing.vec().begin(), state.inducing.vec().end());
        flat.insert(flat.end(), state.kernel.log_lengthscale.begin(),
                    state.kernel.log_lengthscale.end());
        flat.push_back(state.kernel.log_variance);
    };
    auto unpack = [&](const std::vector<double>& flat) {
        size_t o = 0;
        std::copy_n(flat.begin() + o, state.eta.size(), state.eta.vec().begin());
        o += state.eta.size();
        std::copy_n(flat.begin() + o, state.chol_off.size(), state.chol_off.vec().begin());
        o += state.chol_off.size();
        std::copy_n(flat.begin() + o, state.chol_log_diag.size(),
                    state.chol_log_diag.vec().begin());
        o += state.chol_log_diag.size();
        std::copy_n(flat.begin() + o, state.inducing.size(), state.inducing.vec().begin());
        o += state.inducing.size();
        std::copy_n(flat.begin() + o, state.kernel.log_lengthscale.size(),
                    state.kernel.log_lengthscale.begin());
        o += state.kernel.log_lengthscale.size();
        state.kernel.log_variance = flat[o];
    };
    auto pack_grads = [&](const GpGradients& g, std::vector<double>& flat) {
        flat.clear();
        flat.insert(flat.end(), g.eta.vec().begin(), g.eta.vec().end());
        flat.insert(flat.end(), g.chol_off.vec().begin(), g.chol_off.vec().end());
        flat.insert(flat.end(), g.chol_log_diag.vec().begin(), g.chol_log_diag.vec().end());
        flat.insert(flat.end(), g.inducing.vec().begin(), g.inducing.vec().end());
        flat.insert(flat.end(), g.log_lengthscale.vec().begin(), g.log_lengthscale.vec().end());
        flat.push_back(g.log_variance);
    };

    std::vector<double> params, grads;
    pack(params);
    Adam opt(config.learning_rate);
    GaussHermite gh(config.n_nodes);

    Rng shuffle_rng(config.seed, tag_hash("gp-batches"));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    GpGraph graph;
    post.diagnostics.elbo_trace.reserve(config.epochs);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i],
                      order[static_cast<int>(shuffle_rng.below(static_cast<std::uint32_t>(i + 1)))]);
        double epoch_elbo = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int stop = std::min(n, start + config.batch_size);
            const int bs = stop - start;
            Mat X(bs, d);
            std::vector<int> succ(bs), tri(bs);
            for (int i = 0; i < bs; ++i) {
                const DataPoint& p = train.points[order[start + i]];
                for (int j = 0; j < d; ++j) X(i, j) = p.theta[j];
                succ[i] = p.successes;
                tri[i] = p.trials;
            }
            build_gp_graph(graph, state, X, succ, tri, n, gh);
            graph.tape.backward(graph.elbo);
            const double value = graph.tape.val(graph.elbo)(0, 0);
            if (!std::isfinite(value))
                throw std::runtime_error("train_gp: non-finite ELBO at epoch " +
                                         std::to_string(epoch));
            GpGradients g;
            g.eta = graph.tape.grad(graph.eta);
            g.chol_off = graph.tape.grad(graph.chol_off);
            g.chol_log_diag = graph.tape.grad(graph.chol_log_diag);
            g.inducing = graph.tape.grad(graph.inducing);
            g.log_lengthscale = graph.tape.grad(graph.log_ls);
            g.log_variance = graph.tape.grad(graph.log_var)(0, 0);
            pack_grads(g, grads);
            opt.step(params, grads);  // ascent
            unpack(params);
            epoch_elbo += value;
            ++batches;
        }
        post.diagnostics.elbo_trace.push_back(epoch_elbo / batches);
    }

    {
        Mat X(n, d);
        std::vector<int> succ(n), tri(n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) X(i, j) = train.points[i].theta[j];
            succ[i] = train.points[i].successes;
            tri[i] = train.points[i].trials;
        }
        post.diagnostics.final_elbo = elbo_gp(state, X, succ, tri, n, config.n_nodes);
    }
    post.state = std::move(state);
    post.diagnostics.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return post;
}

GpPrediction predict_gp(const GpPosterior& posterior,
                        const std::vector<std::vector<double>>& raw_thetas, int n_nodes) {
    const int n = static_cast<int>(raw_thetas.size());
    Mat X(n, posterior.state.input_dim());
    int outside = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> s = posterior.scaling.scale(raw_thetas[i]);
        bool out = false;
        for (int j = 0; j < X.cols(); ++j) {
            X(i, j) = s[j];
            out |= s[j] < -1.0 - 1e-9 || s[j] > 1.0 + 1e-9;
        }
        if (out) ++outside;
    }
    if (outside > 0)
        std::fprintf(stderr,
                     "warning: %d of %d prediction inputs lie outside the training parameter "
                     "box; extrapolating\n",
                     outside, n);
    GpMarginals marg = q_g_marginals(posterior.state, X);
    GaussHermite gh(n_nodes);
    const double inv_sqrt_pi = 0.56418958354775628695;
    GpPrediction out;
    out.extrapolated = outside;
    out.mean.resize(n);
    out.stddev.resize(n);
    out.latent_mean = marg.mean;
    out.latent_var = marg.var;
    for (int i = 0; i < n; ++i) {
        const double sd2 = std::sqrt(2.0 * marg.var[i]);
        double m1 = 0.0, m2 = 0.0;
        for (size_t j = 0; j < gh.nodes.size(); ++j) {
            double p = normal_cdf(marg.mean[i] + sd2 * gh.nodes[j]);
            m1 += gh.weights[j] * p;
            m2 += gh.weights[j] * p * p;
        }
        m1 *= inv_sqrt_pi;
        m2 *= inv_sqrt_pi;
        out.mean[i] = std::min(1.0, std::max(0.0, m1));
        out.stddev[i] = std::sqrt(std::max(m2 - m1 * m1, 1e-18));
    }
    return out;
}

std::vector<double> predict_gp_quantile(const GpPosterior& posterior,
                                        const std::vector<std::vector<double>>& raw_thetas,
                                        double p) {
    const int n = static_cast<int>(raw_thetas.size());
    Mat X(n, posterior.state.input_dim());
    for (int i = 0; i < n; ++i) {
        std::vector<double> s = posterior.scaling.scale(raw_thetas[i]);
        for (int j = 0; j < X.cols(); ++j) X(i, j) = s[j];
    }
    GpMarginals marg = q_g_marginals(posterior.state, X);
    const double z = normal_quantile(p);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i)
        out[i] = normal_cdf(marg.mean[i] + std::sqrt(marg.var[i]) * z);
    return out;
}

}  // namespace svsmc
