#include <doctest.h>

#include <cmath>
#include <functional>

#include "svsmc/autodiff.hpp"
#include "svsmc/rng.hpp"

using namespace svsmc;
using ad::Tape;

namespace {

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
    Mat m(r, c);
    for (double& x : m.vec()) x = scale * rng.normal();
    return m;
}

Mat random_spd(int n, Rng& rng) {
    Mat a = random_mat(n, n + 3, rng);
    Mat s = matmul_nt(a, a);
    for (int i = 0; i < n; ++i) s(i, i) += 1.0;
    return s;
}

// Central finite differences on every entry of every leaf against the tape
// gradient. The builder receives the leaf values and must return (tape, root,
// leaf ids).
struct Built {
    Tape tape;
    int root = -1;
    std::vector<int> leaves;
};

void check_gradients(const std::vector<Mat>& leaf_values,
                     const std::function<void(Built&, const std::vector<Mat>&)>& build,
                     double h = 1e-5, double rel_tol = 1e-6, double abs_tol = 1e-8) {
    Built b;
    build(b, leaf_values);
    b.tape.backward(b.root);
    std::vector<Mat> grads;
    for (int id : b.leaves) grads.push_back(b.tape.grad(id));

    for (size_t l = 0; l < leaf_values.size(); ++l) {
        for (size_t k = 0; k < leaf_values[l].size(); ++k) {
            std::vector<Mat> plus = leaf_values, minus = leaf_values;
            plus[l].vec()[k] += h;
            minus[l].vec()[k] -= h;
            Built bp, bm;
            build(bp, plus);
            build(bm, minus);
            const double fd =
                (bp.tape.val(bp.root)(0, 0) - bm.tape.val(bm.root)(0, 0)) / (2.0 * h);
            const double an = grads[l].vec()[k];
            const double tol = abs_tol + rel_tol * std::max(std::abs(fd), std::abs(an));
            CHECK(std::abs(fd - an) <= tol);
        }
    }
}

}  // namespace

TEST_CASE("elementwise and matmul gradients match finite differences") {
    Rng rng(11);
    std::vector<Mat> leaves{random_mat(3, 2, rng), random_mat(2, 4, rng)};
    check_gradients(leaves, [](Built& b, const std::vector<Mat>& v) {
        int a = b.tape.leaf(v[0]);
        int c = b.tape.leaf(v[1]);
        int mm = b.tape.matmul(a, c);
        int s = b.tape.sigmoid(mm);
        int lr = b.tape.leaky_relu(b.tape.affine_scalar(s, 3.0, -1.5), 0.01);
        b.root = b.tape.frobenius_sq(lr);
        b.leaves = {a, c};
    });
}

TEST_CASE("cholesky and triangular solve gradients match finite differences") {
    Rng rng(12);
    Mat spd = random_spd(4, rng);
    Mat rhs = random_mat(4, 2, rng);
    std::vector<Mat> leaves{spd, rhs};
    check_gradients(
        leaves,
        [](Built& b, const std::vector<Mat>& v) {
            // Symmetrize the leaf inside the graph so FD perturbations stay
            // in the symmetric cone the same way training graphs do.
            int a = b.tape.leaf(v[0]);
            int sym = b.tape.affine_scalar(b.tape.add(a, b.tape.transpose(a)), 0.5, 0.0);
            int rhs = b.tape.leaf(v[1]);
            int l = b.tape.cholesky(sym);
            int x = b.tape.solve_lower(l, rhs);
            int y = b.tape.solve_lower_transposed(l, x);
            int ld = b.tape.log_diag_sum(l);
            b.root = b.tape.add(b.tape.frobenius_sq(y), ld);
            b.leaves = {a, rhs};
        },
        1e-6, 1e-5, 1e-7);
}

TEST_CASE("make_lower, row/col sumsq and sum gradients match finite differences") {
    Rng rng(13);
    const int m = 4;
    std::vector<Mat> leaves{random_mat(m * (m - 1) / 2, 1, rng), random_mat(m, 1, rng, 0.3),
                            random_mat(3, m, rng)};
    check_gradients(leaves, [m](Built& b, const std::vector<Mat>& v) {
        int off = b.tape.leaf(v[0]);
        int ld = b.tape.leaf(v[1]);
        int a = b.tape.leaf(v[2]);
        int s = b.tape.make_lower(off, ld, m);
        int p = b.tape.matmul(a, s);
        int r1 = b.tape.sum(b.tape.row_sumsq(p));
        int r2 = b.tape.sum(b.tape.col_sumsq(p));
        int r3 = b.tape.log_diag_sum(s);
        b.root = b.tape.add(b.tape.add(r1, r2), r3);
        b.leaves = {off, ld, a};
    });
}

TEST_CASE("rbf kernel gradients match finite differences") {
    Rng rng(14);
    std::vector<Mat> leaves{random_mat(4, 2, rng), random_mat(3, 2, rng), random_mat(2, 1, rng, 0.4),
                            random_mat(1, 1, rng, 0.4)};
    // cross kernel
    check_gradients(leaves, [](Built& b, const std::vector<Mat>& v) {
        int x = b.tape.leaf(v[0]);
        int y = b.tape.leaf(v[1]);
        int ls = b.tape.leaf(v[2]);
        int lv = b.tape.leaf(v[3]);
        int k = b.tape.rbf_kernel(x, y, ls, lv, 0.0, false);
        b.root = b.tape.frobenius_sq(k);
        b.leaves = {x, y, ls, lv};
    });
    // symmetric kernel with jitter, x used in both slots
    std::vector<Mat> leaves2{leaves[0], leaves[2], leaves[3]};
    check_gradients(leaves2, [](Built& b, const std::vector<Mat>& v) {
        int x = b.tape.leaf(v[0]);
        int ls = b.tape.leaf(v[1]);
        int lv = b.tape.leaf(v[2]);
        int k = b.tape.rbf_kernel(x, x, ls, lv, 1e-4, true);
        int l = b.tape.cholesky(k);
        b.root = b.tape.log_diag_sum(l);
        b.leaves = {x, ls, lv};
    });
}

TEST_CASE("likelihood op gradients match finite differences") {
    Rng rng(15);
    GaussHermite gh(20);
    std::vector<int> succ{3, 0, 10, 7};
    std::vector<int> trials{10, 10, 10, 10};

    // direct binomial log-likelihood through a sigmoid
    std::vector<Mat> leaves{random_mat(4, 1, rng)};
    check_gradients(leaves, [&](Built& b, const std::vector<Mat>& v) {
        int z = b.tape.leaf(v[0]);
        int f = b.tape.sigmoid(z);
        b.root = b.tape.binomial_log_lik(f, succ, trials);
        b.leaves = {z};
    });

    // Gauss-Hermite expected log-likelihood in (mean, var)
    Mat mean = random_mat(4, 1, rng);
    Mat logvar = random_mat(4, 1, rng, 0.3);
    std::vector<Mat> leaves2{mean, logvar};
    check_gradients(leaves2, [&](Built& b, const std::vector<Mat>& v) {
        int mu = b.tape.leaf(v[0]);
        int lv = b.tape.leaf(v[1]);
        int var = b.tape.exp_elem(lv);  // keep var positive under FD
        b.root = b.tape.gh_binomial_log_lik(mu, var, succ, trials, gh);
        b.leaves = {mu, lv};
    });
}

TEST_CASE("gaussian KL op value and gradient") {
    Rng rng(16);
    Mat mu = random_mat(5, 1, rng);
    Mat rho = random_mat(5, 1, rng, 0.2);
    std::vector<double> center{0.1, -0.2, 0.0, 0.5, 1.0};
    std::vector<double> stds{1.0, 0.5, 2.0, 1.0, 0.25};

    // KL(N(1,1) || N(0,1)) = 0.5 for a single weight
    Tape t;
    Mat m1(1, 1, 1.0), r0(1, 1, 0.0);
    int a = t.leaf(m1);
    int b = t.leaf(r0);
    int kl = t.gaussian_kl(a, b, {0.0}, {1.0});
    CHECK(t.val(kl)(0, 0) == doctest::Approx(0.5).epsilon(1e-12));

    std::vector<Mat> leaves{mu, rho};
    check_gradients(leaves, [&](Built& bb, const std::vector<Mat>& v) {
        int m = bb.tape.leaf(v[0]);
        int r = bb.tape.leaf(v[1]);
        bb.root = bb.tape.gaussian_kl(m, r, center, stds);
        bb.leaves = {m, r};
    });
}
