#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svsmc/bnn.hpp"
#include "svsmc/dataset.hpp"
#include "svsmc/gp.hpp"
#include "svsmc/guarantees.hpp"

namespace svsmc {

struct RandomModelSpec {
    int r = 2;
    int count = 1;
};

struct RunSizes {
    int n_train = 500;
    int m_train = 50;
    int n_cal = 200;
    int n_test = 1000;
    int m_test = 1000;
};

struct RunConfig {
    std::string model_path;                      // either a model file ...
    std::optional<RandomModelSpec> random_model; // ... or a generation spec
    std::string formula;
    double horizon = 0.0;
    RunSizes sizes;
    SamplingStrategy sampling = SamplingStrategy::UniformRandom;
    std::string backend = "gp";
    GpConfig gp;
    BnnConfig bnn;
    double epsilon = 0.05;
    double epsilon2 = 0.05;
    ScoreNormalizer normalizer = ScoreNormalizer::PosteriorStd;
    double z = 1.96;
    std::uint64_t seed = 0;
    int threads = 0;
    std::string out_dir = "run";
};

RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::string& path);
void validate_run_config(const RunConfig& config);

// generate: model + train/calibration/test datasets + manifest under out_dir.
struct GeneratedPaths {
    std::string model;
    std::string train, calibration, test;
    std::string manifest;
};
GeneratedPaths cmd_generate(const RunConfig& config);

// train: posterior bundle + diagnostics for the configured backend.
struct TrainedPaths {
    std::string posterior;
    std::string diagnostics;
};
TrainedPaths cmd_train(const RunConfig& config, const std::string& train_csv);

// calibrate: ICP/NICP, Chernoff-combined, and PAC-Bayes report.
struct CalibrationPaths {
    std::string report;
    std::vector<std::string> tables;
};
CalibrationPaths cmd_calibrate(const std::string& posterior_path,
                               const std::string& calibration_csv, double epsilon,
                               double epsilon2, ScoreNormalizer normalizer,
                               const std::string& out_dir);

struct EvaluationPaths {
    std::string report;
    std::string per_point;
};
EvaluationPaths cmd_evaluate(const std::string& posterior_path, const std::string& test_csv,
                             double epsilon, double z, const std::string& out_dir);

// simulate: one trajectory as CSV (time,species...) written to out_path
// ("-" for stdout).
void cmd_simulate(const std::string& model_path, const std::vector<double>& params,
                  double horizon, std::uint64_t seed, const std::string& out_path);

// monitor: SMC estimate of the satisfaction probability at one parameter
// point; returns the JSON written to stdout.
std::string cmd_monitor(const std::string& model_path, const std::string& formula,
                        const std::vector<double>& params, double horizon, int runs,
                        std::uint64_t seed, double z);

std::vector<std::string> cmd_random_model(int r, int count, std::uint64_t seed,
                                          const std::string& out_dir);

}  // namespace svsmc
