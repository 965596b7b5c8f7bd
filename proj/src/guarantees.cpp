#include "svsmc/guarantees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace svsmc {

ScoreNormalizer normalizer_from_string(const std::string& s) {
    if (s == "id") return ScoreNormalizer::Identity;
    if (s == "posterior-std") return ScoreNormalizer::PosteriorStd;
    if (s == "posterior-iqr") return ScoreNormalizer::PosteriorIqr;
    throw std::invalid_argument("unknown normalizer: " + s);
}

std::string normalizer_to_string(ScoreNormalizer n) {
    switch (n) {
        case ScoreNormalizer::Identity: return "id";
        case ScoreNormalizer::PosteriorStd: return "posterior-std";
        case ScoreNormalizer::PosteriorIqr: return "posterior-iqr";
    }
    return "";
}

std::string bound_kind_to_string(BoundKind k) {
    switch (k) {
        case BoundKind::Icp: return "icp";
        case BoundKind::Nicp: return "nicp";
        case BoundKind::IcpChernoff: return "icp+chernoff";
        case BoundKind::NicpChernoff: return "nicp+chernoff";
    }
    return "";
}

std::vector<double> normalizer_values(const PosteriorSummary& summary, ScoreNormalizer normalizer,
                                      bool* clamped) {
    const size_t n = summary.mean.size();
    std::vector<double> u(n, 1.0);
    bool hit = false;
    if (normalizer == ScoreNormalizer::PosteriorStd) {
        for (size_t i = 0; i < n; ++i) {
            double v = summary.stddev[i];
            if (v <= 0.0)
                throw std::invalid_argument(
                    "normalizer_values: zero posterior std at a calibration point");
            if (v < kNormalizerFloor) {
                v = kNormalizerFloor;
                hit = true;
            }
            u[i] = v;
        }
    } else if (normalizer == ScoreNormalizer::PosteriorIqr) {
        const auto& lo = summary.quantiles.at(0.25);
        const auto& hi = summary.quantiles.at(0.75);
        for (size_t i = 0; i < n; ++i) {
            double v = hi[i] - lo[i];
            if (v < kNormalizerFloor) {
                v = kNormalizerFloor;
                hit = true;
            }
            u[i] = v;
        }
    }
    if (clamped) *clamped = hit;
    return u;
}

CalibrationScores nonconformity_scores(const Posterior& posterior, const Dataset& calibration,
                                       ScoreNormalizer normalizer) {
    if (calibration.role != DatasetRole::Calibration)
        throw std::invalid_argument("nonconformity_scores: dataset role must be calibration");
    if (calibration.size() < 1)
        throw std::invalid_argument("nonconformity_scores: empty calibration set");
    if (calibration.trials() != posterior.training_trials())
        throw std::invalid_argument(
            "nonconformity_scores: calibration trials (" + std::to_string(calibration.trials()) +
            ") must equal training trials (" + std::to_string(posterior.training_trials()) + ")");

    std::vector<std::vector<double>> thetas;
    thetas.reserve(calibration.size());
    for (const auto& p : calibration.points) thetas.push_back(p.theta);
    std::vector<double> probs;
    if (normalizer == ScoreNormalizer::PosteriorIqr) probs = {0.25, 0.75};
    PosteriorSummary summary = posterior.summarize(thetas, probs);

    CalibrationScores out;
    out.normalizer = normalizer;
    out.raw.resize(calibration.size());
    for (int i = 0; i < calibration.size(); ++i) {
        const auto& p = calibration.points[i];
        const double lbar = static_cast<double>(p.successes) / p.trials;
        out.raw[i] = std::abs(lbar - summary.mean[i]);
    }
    std::vector<double> u = normalizer_values(summary, normalizer, &out.normalizer_clamped);
    out.normalized.resize(out.raw.size());
    for (size_t i = 0; i < out.raw.size(); ++i) out.normalized[i] = out.raw[i] / u[i];
    return out;
}

ConformalQuantile conformal_quantile(std::vector<double> scores, double epsilon) {
    if (scores.empty()) throw std::invalid_argument("conformal_quantile: empty scores");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("conformal_quantile: epsilon must be in (0,1)");
    const int n = static_cast<int>(scores.size());
    ConformalQuantile q;
    q.rank = static_cast<int>(std::ceil((n + 1) * (1.0 - epsilon)));
    if (q.rank > n) {
        q.tau = std::numeric_limits<double>::infinity();
        q.vacuous = true;
        return q;
    }
    std::nth_element(scores.begin(), scores.begin() + (q.rank - 1), scores.end());
    q.tau = scores[q.rank - 1];
    return q;
}

GuaranteeBound icp_bound(const Posterior& posterior, const Dataset& calibration, double epsilon) {
    CalibrationScores s = nonconformity_scores(posterior, calibration, ScoreNormalizer::Identity);
    ConformalQuantile q = conformal_quantile(s.raw, epsilon);
    GuaranteeBound b;
    b.kind = BoundKind::Icp;
    b.epsilon_total = epsilon;
    b.tau = q.tau;
    b.normalizer = ScoreNormalizer::Identity;
    b.target = BoundTarget::SmcEstimate;
    b.vacuous = q.vacuous;
    return b;
}

GuaranteeBound nicp_bound(const Posterior& posterior, const Dataset& calibration, double epsilon,
                          ScoreNormalizer normalizer) {
    if (normalizer == ScoreNormalizer::Identity)
        throw std::invalid_argument("nicp_bound: use icp_bound for the identity normalizer");
    CalibrationScores s = nonconformity_scores(posterior, calibration, normalizer);
    ConformalQuantile q = conformal_quantile(s.normalized, epsilon);
    GuaranteeBound b;
    b.kind = BoundKind::Nicp;
    b.epsilon_total = epsilon;
    b.tau = q.tau;
    b.normalizer = normalizer;
    b.target = BoundTarget::SmcEstimate;
    b.vacuous = q.vacuous;
    return b;
}

double chernoff_half_width(int m_trials, double epsilon2) {
    if (m_trials < 1) throw std::invalid_argument("chernoff_half_width: trials must be >= 1");
    if (!(epsilon2 > 0.0 && epsilon2 < 1.0))
        throw std::invalid_argument("chernoff_half_width: epsilon2 must be in (0,1)");
    return std::sqrt(std::log(2.0 / epsilon2) / (2.0 * m_trials));
}

GuaranteeBound combined_bound(const GuaranteeBound& base, int m_trials, double epsilon2) {
    if (base.target != BoundTarget::SmcEstimate)
        throw std::invalid_argument("combined_bound: base must target the SMC estimate");
    if (base.kind != BoundKind::Icp && base.kind != BoundKind::Nicp)
        throw std::invalid_argument("combined_bound: base must be a plain ICP or NICP bound");
    GuaranteeBound b = base;
    b.kind = base.kind == BoundKind::Icp ? BoundKind::IcpChernoff : BoundKind::NicpChernoff;
    b.chernoff = chernoff_half_width(m_trials, epsilon2);
    b.epsilon_total = base.epsilon_total + epsilon2;
    b.target = BoundTarget::ExactSatisfaction;
    if (b.epsilon_total >= 1.0) b.vacuous = true;
    return b;
}

double pac_bayes_bound(double empirical_error, double kl, int n, double epsilon, double c) {
    if (n < 1) throw std::invalid_argument("pac_bayes_bound: n must be >= 1");
    if (kl < 0.0) throw std::invalid_argument("pac_bayes_bound: kl must be nonnegative");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw std::invalid_argument("pac_bayes_bound: epsilon must be in (0,1)");
    if (!(c > 0.0)) throw std::invalid_argument("pac_bayes_bound: c must be positive");
    const double num = kl + std::log(1.0 / epsilon);
    const double lambda_star = std::sqrt(8.0 * n * num / (c * c));
    if (lambda_star == 0.0) return empirical_error;  // kl = 0 and epsilon = 1 cannot happen here
    return empirical_error + lambda_star * c * c / (8.0 * n) + num / lambda_star;
}

double kl_for_pac(const Posterior& posterior) { return posterior.pac_kl(); }

ExpectedError expected_errors(const Posterior& posterior, const Dataset& dataset, int c_samples,
                              std::uint64_t seed) {
    if (dataset.size() < 1) throw std::invalid_argument("expected_errors: empty dataset");
    std::vector<std::vector<double>> thetas;
    thetas.reserve(dataset.size());
    for (const auto& p : dataset.points) thetas.push_back(p.theta);
    Mat samples = posterior.sample_predictions(thetas, c_samples, seed);
    const int c = samples.rows(), n = samples.cols();
    std::vector<double> emp(c, 0.0);
    for (int i = 0; i < c; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) {
            const auto& p = dataset.points[j];
            const double lbar = static_cast<double>(p.successes) / p.trials;
            acc += std::abs(lbar - samples(i, j));
        }
        emp[i] = acc / n;
    }
    ExpectedError out;
    for (double v : emp) out.mean += v;
    out.mean /= c;
    double q = 0.0;
    for (double v : emp) q += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(q / (c - 1.0)) / std::sqrt(static_cast<double>(c));
    return out;
}

}  // namespace svsmc
