#pragma once

#include <cstdint>
#include <vector>

#include "svsmc/dataset.hpp"
#include "svsmc/linalg.hpp"

namespace svsmc {

struct RbfKernel {
    std::vector<double> log_lengthscale;  // one per input dimension
    double log_variance = 0.0;
};

// K(X, Y); when x_is_y the diagonal receives jitter_rel * exp(log_variance).
Mat kernel_matrix(const RbfKernel& kernel, const Mat& X, const Mat& Y, double jitter_rel,
                  bool x_is_y);

struct GpVariationalState {
    Mat inducing;       // m x d, scaled input space
    Mat eta;            // m x 1, variational mean of the inducing values
    Mat chol_off;       // strictly-lower entries of S, packed row-major
    Mat chol_log_diag;  // log of the (positive) diagonal of S
    RbfKernel kernel;
    double jitter_rel = 1e-6;

    int inducing_count() const { return inducing.rows(); }
    int input_dim() const { return inducing.cols(); }
    Mat chol_factor() const;  // S, lower triangular with positive diagonal
};

struct GpMarginals {
    std::vector<double> mean;
    std::vector<double> var;
};

// Marginals of q(g) at rows of X, via triangular solves against chol(K_mm).
GpMarginals q_g_marginals(const GpVariationalState& state, const Mat& X);

// Full q(g) mean and covariance at rows of X (used by the PAC-Bayes KL).
void q_g_full(const GpVariationalState& state, const Mat& X, Mat& mean_out, Mat& cov_out);

// Gauss-Hermite approximation of E_{g~N(mean,var)}[log Binomial(s | t, Phi(g))].
double expected_log_lik(double mean, double var, int successes, int trials, int n_nodes);

// KL[N(eta, S S^T) || N(0, K_mm)].
double gp_kl_to_prior(const GpVariationalState& state);

double elbo_gp(const GpVariationalState& state, const Mat& X, const std::vector<int>& successes,
               const std::vector<int>& trials, int n_total, int n_nodes);

struct GpGradients {
    double value = 0.0;
    Mat eta, chol_off, chol_log_diag, inducing, log_lengthscale;
    double log_variance = 0.0;
};

GpGradients elbo_gp_with_gradients(const GpVariationalState& state, const Mat& X,
                                   const std::vector<int>& successes,
                                   const std::vector<int>& trials, int n_total, int n_nodes);

struct GpConfig {
    int max_inducing = 1000;
    int epochs = 2000;
    int batch_size = 100;
    double learning_rate = 0.001;
    int n_nodes = 20;
    double jitter_rel = 1e-6;
    std::uint64_t seed = 0;
};

struct TrainDiagnostics {
    std::vector<double> elbo_trace;  // one entry per epoch
    double final_elbo = 0.0;
    double wall_clock_seconds = 0.0;
};

struct GpPosterior {
    GpVariationalState state;
    Scaling scaling;
    RbfKernel reference_kernel;  // hyperparameters before training; the
                                 // data-independent prior for PAC-Bayes
    int training_trials = 0;
    // Training data (scaled inputs) kept for the PAC-Bayes bound.
    Mat training_inputs;
    std::vector<int> training_successes;
    TrainDiagnostics diagnostics;
};

GpPosterior train_gp(const Dataset& train, const GpConfig& config);

Mat thetas_to_mat(const std::vector<std::vector<double>>& thetas);

struct GpPrediction {
    std::vector<double> mean;    // E[f], f = Phi(g)
    std::vector<double> stddev;  // sqrt(Var[f])
    std::vector<double> latent_mean, latent_var;
    int extrapolated = 0;  // inputs outside the training box (allowed, flagged)
};

GpPrediction predict_gp(const GpPosterior& posterior,
                        const std::vector<std::vector<double>>& raw_thetas, int n_nodes = 20);

// Quantile of f: the monotone link maps latent Gaussian quantiles exactly.
std::vector<double> predict_gp_quantile(const GpPosterior& posterior,
                                        const std::vector<std::vector<double>>& raw_thetas,
                                        double p);

}  // namespace svsmc
