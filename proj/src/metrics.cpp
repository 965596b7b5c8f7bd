#include "svsmc/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace svsmc {

using nlohmann::json;

namespace {

std::vector<std::vector<double>> thetas_of(const Dataset& d) {
    std::vector<std::vector<double>> t;
    t.reserve(d.points.size());
    for (const auto& p : d.points) t.push_back(p.theta);
    return t;
}

}  // namespace

double rmse(const Posterior& posterior, const Dataset& test) {
    if (test.size() < 1) throw std::invalid_argument("rmse: empty test set");
    std::vector<double> mean = posterior.mean(thetas_of(test));
    double acc = 0.0;
    for (int i = 0; i < test.size(); ++i) {
        const auto& p = test.points[i];
        const double lbar = static_cast<double>(p.successes) / p.trials;
        const double r = lbar - mean[i];
        acc += r * r;
    }
    return std::sqrt(acc / test.size());
}

double accuracy(const Posterior& posterior, const Dataset& test, double epsilon, double z) {
    if (!(z > 0.0)) throw std::invalid_argument("accuracy: z must be positive");
    EvaluationReport rep = evaluate(posterior, test, epsilon, z);
    return rep.accuracy;
}

double uncertainty_width(const Posterior& posterior, const Dataset& test, double epsilon) {
    EvaluationReport rep = evaluate(posterior, test, epsilon, 1.96);
    return rep.uncertainty_width;
}

EvaluationReport evaluate(const Posterior& posterior, const Dataset& test, double epsilon,
                          double z) {
    if (test.size() < 1) throw std::invalid_argument("evaluate: empty test set");
    EvaluationReport rep;
    rep.epsilon = epsilon;
    rep.z = z;
    rep.n_points = test.size();
    PosteriorSummary s = posterior.summarize(thetas_of(test), {epsilon / 2.0, 1.0 - epsilon / 2.0});
    const auto& qlo = s.quantiles.at(epsilon / 2.0);
    const auto& qhi = s.quantiles.at(1.0 - epsilon / 2.0);

    double sq = 0.0, hits = 0.0, width = 0.0, smc_width = 0.0;
    rep.per_point.reserve(test.size());
    for (int i = 0; i < test.size(); ++i) {
        const auto& p = test.points[i];
        SmcEstimate e = smc_estimate(p.successes, p.trials, z);
        EvaluationRow row;
        row.theta = p.theta;
        row.lbar = e.mean;
        row.smc_lo = e.mean - e.ci_halfwidth;
        row.smc_hi = e.mean + e.ci_halfwidth;
        row.pred_mean = s.mean[i];
        row.cred_lo = qlo[i];
        row.cred_hi = qhi[i];
        rep.per_point.push_back(row);

        const double r = e.mean - s.mean[i];
        sq += r * r;
        if (row.smc_lo <= row.cred_hi && row.cred_lo <= row.smc_hi) hits += 1.0;
        width += row.cred_hi - row.cred_lo;
        smc_width += 2.0 * e.ci_halfwidth;
    }
    rep.rmse = std::sqrt(sq / test.size());
    rep.accuracy = hits / test.size();
    rep.uncertainty_width = width / test.size();
    rep.test_uncertainty_width = smc_width / test.size();
    return rep;
}

std::string report_to_json_text(const EvaluationReport& report) {
    json j;
    j["schema"] = "svsmc-evaluation";
    j["rmse"] = report.rmse;
    j["accuracy"] = report.accuracy;
    j["uncertainty_width"] = report.uncertainty_width;
    j["test_uncertainty_width"] = report.test_uncertainty_width;
    j["epsilon"] = report.epsilon;
    j["z"] = report.z;
    j["n_points"] = report.n_points;
    return j.dump(2);
}

void write_report(const EvaluationReport& report, const std::string& json_path,
                  const std::string& csv_path) {
    {
        std::ofstream out(json_path);
        if (!out) throw std::runtime_error("cannot write report " + json_path);
        out << report_to_json_text(report) << "\n";
    }
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write report " + csv_path);
    const int d = report.per_point.empty() ? 0 : static_cast<int>(report.per_point[0].theta.size());
    for (int k = 0; k < d; ++k) out << "theta_" << k << ",";
    out << "lbar,smc_lo,smc_hi,pred_mean,cred_lo,cred_hi\n";
    char buf[40];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << sep;
    };
    for (const auto& row : report.per_point) {
        for (int k = 0; k < d; ++k) put(row.theta[k], ',');
        put(row.lbar, ',');
        put(row.smc_lo, ',');
        put(row.smc_hi, ',');
        put(row.pred_mean, ',');
        put(row.cred_lo, ',');
        put(row.cred_hi, '\n');
    }
}

}  // namespace svsmc
