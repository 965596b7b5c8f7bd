#pragma once

#include <string>
#include <vector>

#include "svsmc/dataset.hpp"
#include "svsmc/posterior.hpp"

namespace svsmc {

struct EvaluationRow {
    std::vector<double> theta;
    double lbar = 0.0;
    double smc_lo = 0.0, smc_hi = 0.0;
    double pred_mean = 0.0;
    double cred_lo = 0.0, cred_hi = 0.0;
};

struct EvaluationReport {
    double rmse = 0.0;
    double accuracy = 0.0;
    double uncertainty_width = 0.0;       // average credible-interval width
    double test_uncertainty_width = 0.0;  // SMC reference: average 2 z sigma / sqrt(M)
    double epsilon = 0.05;
    double z = 1.96;
    int n_points = 0;
    std::vector<EvaluationRow> per_point;
};

double rmse(const Posterior& posterior, const Dataset& test);
// Fraction of points whose SMC confidence interval (centered at Lbar)
// intersects the posterior credible interval [q_{eps/2}, q_{1-eps/2}].
double accuracy(const Posterior& posterior, const Dataset& test, double epsilon, double z);
double uncertainty_width(const Posterior& posterior, const Dataset& test, double epsilon);

EvaluationReport evaluate(const Posterior& posterior, const Dataset& test, double epsilon,
                          double z);

std::string report_to_json_text(const EvaluationReport& report);
void write_report(const EvaluationReport& report, const std::string& json_path,
                  const std::string& csv_path);

}  // namespace svsmc
