#pragma once

#include <cstdint>
#include <vector>

#include "svsmc/dataset.hpp"
#include "svsmc/gp.hpp"  // TrainDiagnostics
#include "svsmc/linalg.hpp"

namespace svsmc {

struct BnnArchitecture {
    int input_dim = 1;
    std::vector<int> hidden{64, 64, 64};
    double leaky_slope = 0.01;

    int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
    int fan_in(int layer) const {
        return layer == 0 ? input_dim : hidden[layer - 1];
    }
    int fan_out(int layer) const {
        return layer == layer_count() - 1 ? 1 : hidden[layer];
    }
    // Prior std is 1/m with m the layer width; the 1-unit output layer
    // inherits the last hidden width.
    double prior_std(int layer) const {
        return 1.0 / (layer == layer_count() - 1 ? hidden.back() : hidden[layer]);
    }
    long long parameter_count() const;
};

struct BnnWeights {
    std::vector<Mat> w;  // fan_in x fan_out per layer
    std::vector<Mat> b;  // 1 x fan_out per layer
};

struct BnnPrior {
    BnnWeights center;
    std::vector<double> std_per_layer;
};

struct WeightPosterior {
    BnnArchitecture arch;
    BnnWeights mu;
    BnnWeights rho;  // log standard deviations
    BnnPrior prior;
    Scaling scaling;
    int training_trials = 0;
    // Training data (scaled inputs) kept for the PAC-Bayes empirical error.
    Mat training_inputs;
    std::vector<int> training_successes;
    TrainDiagnostics diagnostics;
    bool pretrained_prior = false;
    std::uint64_t predict_seed = 0;
    int predict_samples = 1000;
};

// Deterministic forward pass; rows of X are scaled inputs, output in (0,1).
Mat bnn_forward(const BnnArchitecture& arch, const BnnWeights& weights, const Mat& X);

// Closed-form KL between the mean-field posterior and the prior.
double kl_weights(const WeightPosterior& posterior);

// Reparameterized ELBO with noise drawn from rng (n_mc samples).
double elbo_bnn(const WeightPosterior& posterior, const Mat& X, const std::vector<int>& successes,
                const std::vector<int>& trials, int n_total, int n_mc, Rng& rng);

// Same objective with caller-fixed noise; used for gradient checks.
struct BnnGradients {
    double value = 0.0;
    BnnWeights mu;
    BnnWeights rho;
};
double elbo_bnn_fixed_noise(const WeightPosterior& posterior, const Mat& X,
                            const std::vector<int>& successes, const std::vector<int>& trials,
                            int n_total, const BnnWeights& noise, BnnGradients* grads = nullptr);

struct BnnConfig {
    std::vector<int> hidden{64, 64, 64};
    double leaky_slope = 0.01;
    int epochs = 2000;
    int batch_size = 100;
    double learning_rate = 0.001;
    int n_mc = 1;
    bool pretrain = true;
    int pretrain_epochs = 2000;
    std::uint64_t seed = 0;
    int predict_samples = 1000;
};

// Maximum-likelihood training of a deterministic network of the same shape;
// the learned weights become the prior center, with per-layer std 1/m.
BnnPrior pretrain_prior(const Dataset& train, const BnnArchitecture& arch,
                        const BnnConfig& config);

WeightPosterior train_bnn(const Dataset& train, const BnnConfig& config);

// C weight draws evaluated at each theta; rows are samples.
Mat predict_bnn_samples(const WeightPosterior& posterior,
                        const std::vector<std::vector<double>>& raw_thetas, int c_samples,
                        std::uint64_t seed);

struct BnnPrediction {
    std::vector<double> mean, stddev;
};
BnnPrediction predict_bnn(const WeightPosterior& posterior,
                          const std::vector<std::vector<double>>& raw_thetas, int c_samples,
                          std::uint64_t seed);

// Empirical per-column quantile by order statistic ceil(p*C).
std::vector<double> column_quantile(const Mat& samples, double p);

}  // namespace svsmc
