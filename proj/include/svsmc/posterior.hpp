#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "svsmc/bnn.hpp"
#include "svsmc/gp.hpp"

namespace svsmc {

struct PosteriorSummary {
    std::vector<double> mean;
    std::vector<double> stddev;
    std::map<double, std::vector<double>> quantiles;
};

// Common surface of the trained back ends: per-point predictive mean,
// standard deviation and quantiles of f in [0,1], posterior samples, and the
// KL needed by the PAC-Bayes bound.
class Posterior {
public:
    virtual ~Posterior() = default;
    virtual std::string backend() const = 0;
    virtual int training_trials() const = 0;
    virtual PosteriorSummary summarize(const std::vector<std::vector<double>>& thetas,
                                       const std::vector<double>& probs) const = 0;
    // Rows are posterior draws of f evaluated at each theta.
    virtual Mat sample_predictions(const std::vector<std::vector<double>>& thetas, int c_samples,
                                   std::uint64_t seed) const = 0;
    virtual double pac_kl() const = 0;
    virtual std::string to_json_text() const = 0;

    std::vector<double> mean(const std::vector<std::vector<double>>& thetas) const {
        return summarize(thetas, {}).mean;
    }
};

class GpPosteriorModel final : public Posterior {
public:
    explicit GpPosteriorModel(GpPosterior p) : gp_(std::move(p)) {}
    std::string backend() const override { return "gp"; }
    int training_trials() const override { return gp_.training_trials; }
    PosteriorSummary summarize(const std::vector<std::vector<double>>& thetas,
                               const std::vector<double>& probs) const override;
    Mat sample_predictions(const std::vector<std::vector<double>>& thetas, int c_samples,
                           std::uint64_t seed) const override;
    double pac_kl() const override;
    std::string to_json_text() const override;
    const GpPosterior& gp() const { return gp_; }

private:
    GpPosterior gp_;
};

class BnnPosteriorModel final : public Posterior {
public:
    explicit BnnPosteriorModel(WeightPosterior p) : bnn_(std::move(p)) {}
    std::string backend() const override { return "bnn"; }
    int training_trials() const override { return bnn_.training_trials; }
    PosteriorSummary summarize(const std::vector<std::vector<double>>& thetas,
                               const std::vector<double>& probs) const override;
    Mat sample_predictions(const std::vector<std::vector<double>>& thetas, int c_samples,
                           std::uint64_t seed) const override;
    double pac_kl() const override;
    std::string to_json_text() const override;
    const WeightPosterior& bnn() const { return bnn_; }

private:
    WeightPosterior bnn_;
};

// KL between q(g) and the reference-kernel prior restricted to the given
// (scaled) inputs; the GP instantiation of the PAC-Bayes KL.
double gp_pac_kl(const GpPosterior& posterior, const Mat& scaled_inputs);

std::unique_ptr<Posterior> posterior_from_json_text(const std::string& text);
std::unique_ptr<Posterior> load_posterior(const std::string& path);
void save_posterior(const Posterior& posterior, const std::string& path);

}  // namespace svsmc
