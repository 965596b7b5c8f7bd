#pragma once

#include <string>
#include <vector>

#include "svsmc/pctmc.hpp"
#include "svsmc/stl.hpp"

namespace svsmc {

enum class SamplingStrategy { UniformGrid, UniformRandom, LogRandom };

SamplingStrategy sampling_strategy_from_string(const std::string& s);
std::string sampling_strategy_to_string(SamplingStrategy s);

// Per-dimension affine map onto [-1, 1]; degenerate dimensions map to 0 and
// invert to their lower bound.
struct Scaling {
    std::vector<double> lo, hi;

    bool empty() const { return lo.empty(); }
    int dim() const { return static_cast<int>(lo.size()); }
    std::vector<double> scale(const std::vector<double>& theta) const;
    std::vector<double> unscale(const std::vector<double>& x) const;
};

Scaling scaling_from_space(const std::vector<ParamInterval>& space);

enum class DatasetRole { Train, Calibration, Test };
DatasetRole role_from_string(const std::string& s);
std::string role_to_string(DatasetRole r);

struct DataPoint {
    std::vector<double> theta;
    int successes = 0;
    int trials = 0;
};

struct Dataset {
    std::vector<DataPoint> points;
    DatasetRole role = DatasetRole::Train;
    Scaling scaling;    // recorded by scale_inputs
    bool scaled = false;

    int size() const { return static_cast<int>(points.size()); }
    int dim() const { return points.empty() ? 0 : static_cast<int>(points[0].theta.size()); }
    // All points in one dataset share the same trial count.
    int trials() const;
    void check_invariants() const;
};

struct SmcEstimate {
    double mean = 0.0;
    double std = 0.0;
    double ci_halfwidth = 0.0;
};

// Sample N parameter vectors from the box. Log-random draws
// exp(U(log lo, log hi)) per dimension and requires positive bounds.
std::vector<std::vector<double>> sample_parameters(const std::vector<ParamInterval>& space,
                                                   int n, SamplingStrategy strategy, Rng& rng);

// For each theta, run M seeded simulations and monitor the formula;
// per-point seeds are derived from base_seed so results do not depend on
// the thread count.
Dataset generate_dataset(const PctmcModel& model, const FormulaPtr& formula,
                         const std::vector<std::vector<double>>& thetas, int m_trials,
                         double horizon, DatasetRole role, std::uint64_t base_seed,
                         int threads = 0);

Dataset scale_inputs(const Dataset& dataset, const std::vector<ParamInterval>& space);

// Mean, Bessel-corrected Bernoulli sample std, and z * std / sqrt(trials).
SmcEstimate smc_estimate(int successes, int trials, double z);

struct DatasetMeta {
    std::string role;
    std::uint64_t seed = 0;
    std::string model_hash;
    std::string formula;
    std::vector<ParamInterval> param_space;
};

void save_dataset(const Dataset& dataset, const DatasetMeta& meta, const std::string& csv_path);
Dataset load_dataset(const std::string& csv_path, DatasetMeta* meta_out = nullptr);

}  // namespace svsmc
