#pragma once

#include <functional>
#include <vector>

#include "svsmc/linalg.hpp"
#include "svsmc/math.hpp"

namespace svsmc::ad {

// Minimal reverse-mode tape over dense matrices. Each training step builds a
// fresh graph; backward() runs the recorded closures in reverse order.
// Primitives are kept to what the variational objectives need; every backward
// rule is exercised against central finite differences in the test suite.
class Tape {
public:
    int leaf(Mat v);
    int constant(Mat v);

    int add(int a, int b);
    int sub(int a, int b);
    int mul_elem(int a, int b);
    // out = alpha * a + beta (elementwise)
    int affine_scalar(int a, double alpha, double beta);
    int exp_elem(int a);
    int matmul(int a, int b);
    int transpose(int a);
    int cholesky(int a);
    // rhs_lower marks B as lower triangular, enabling structured kernels.
    int solve_lower(int l, int b, bool rhs_lower = false);
    int solve_lower_transposed(int l, int b);
    // Assemble a lower-triangular matrix from strictly-lower entries (packed
    // row-major) and log-diagonal entries; the diagonal is exp(log_diag).
    int make_lower(int off_packed, int log_diag, int n);
    int row_sumsq(int a);  // n x 1
    int col_sumsq(int a);  // m x 1
    int frobenius_sq(int a);
    int log_diag_sum(int a);
    int sum(int a);
    // Y = X * W + 1 b^T  (b is 1 x m)
    int dense_layer(int x, int w, int b);
    int leaky_relu(int a, double slope);
    int sigmoid(int a);
    // Sum over rows of log Binomial(successes_i | trials_i, f_i), f clipped.
    int binomial_log_lik(int f, std::vector<int> successes, std::vector<int> trials);
    // Sum over rows of E_{g~N(mean_i, var_i)}[log Binomial(s_i | t_i, Phi(g))]
    // by Gauss-Hermite quadrature; var is floored at 1e-12.
    int gh_binomial_log_lik(int mean, int var, std::vector<int> successes,
                            std::vector<int> trials, const GaussHermite& gh);
    // Sum over entries of KL[N(mu_i, exp(rho_i)^2) || N(center_i, std_i^2)].
    int gaussian_kl(int mu, int rho, std::vector<double> prior_center,
                    std::vector<double> prior_std);
    // RBF kernel matrix between X (n x d) and Y (p x d) with per-dimension
    // log-lengthscales (d x 1) and scalar log-variance. x_is_y adds
    // jitter_rel * exp(log_var) to the diagonal and makes the gradient flow
    // into X from both slots.
    int rbf_kernel(int x, int y, int log_ls, int log_var, double jitter_rel, bool x_is_y);

    const Mat& val(int id) const { return nodes_[id].val; }
    const Mat& grad(int id) const { return nodes_[id].grad; }

    void backward(int root);
    void clear();
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        Mat grad;
        bool needs_grad = false;
        std::function<void(Tape&, int)> back;  // empty for leaves/constants
    };

    int push(Mat v, bool needs_grad, std::function<void(Tape&, int)> back = {});
    Mat& grad_ref(int id) { return nodes_[id].grad; }
    bool needs(int id) const { return nodes_[id].needs_grad; }

    std::vector<Node> nodes_;
};

}  // namespace svsmc::ad
