#pragma once

#include <string>
#include <vector>

#include "svsmc/dataset.hpp"
#include "svsmc/posterior.hpp"

namespace svsmc {

enum class ScoreNormalizer { Identity, PosteriorStd, PosteriorIqr };
ScoreNormalizer normalizer_from_string(const std::string& s);
std::string normalizer_to_string(ScoreNormalizer n);

inline constexpr double kNormalizerFloor = 1e-6;

struct CalibrationScores {
    std::vector<double> raw;         // |Lbar_i - mean(theta_i)|
    std::vector<double> normalized;  // raw_i / u(theta_i)
    ScoreNormalizer normalizer = ScoreNormalizer::Identity;
    double epsilon = 0.0;
    bool normalizer_clamped = false;  // the 1e-6 floor fired somewhere
};

// Per-point difficulty estimates u(theta) for a summary that carries the
// quantiles the chosen normalizer needs.
std::vector<double> normalizer_values(const PosteriorSummary& summary, ScoreNormalizer normalizer,
                                      bool* clamped = nullptr);

CalibrationScores nonconformity_scores(const Posterior& posterior, const Dataset& calibration,
                                       ScoreNormalizer normalizer);

struct ConformalQuantile {
    double tau = 0.0;
    int rank = 0;  // 1-based order statistic, ceil((N_c+1)(1-eps))
    bool vacuous = false;
};

ConformalQuantile conformal_quantile(std::vector<double> scores, double epsilon);

enum class BoundKind { Icp, Nicp, IcpChernoff, NicpChernoff };
enum class BoundTarget { SmcEstimate, ExactSatisfaction };
std::string bound_kind_to_string(BoundKind k);

struct GuaranteeBound {
    BoundKind kind = BoundKind::Icp;
    double epsilon_total = 0.0;
    double tau = 0.0;
    ScoreNormalizer normalizer = ScoreNormalizer::Identity;
    BoundTarget target = BoundTarget::SmcEstimate;
    bool vacuous = false;
    double chernoff = 0.0;

    // u is the normalizer value at the point (ignored for constant bounds).
    double half_width(double u) const {
        double base = (kind == BoundKind::Nicp || kind == BoundKind::NicpChernoff) ? tau * u : tau;
        return base + chernoff;
    }
};

GuaranteeBound icp_bound(const Posterior& posterior, const Dataset& calibration, double epsilon);
GuaranteeBound nicp_bound(const Posterior& posterior, const Dataset& calibration, double epsilon,
                          ScoreNormalizer normalizer = ScoreNormalizer::PosteriorStd);

// Half-width T2 with Pr(|f_phi - Lbar| <= T2) >= 1 - eps2 after m trials:
// eps2 = 2 exp(-2 m T2^2).
double chernoff_half_width(int m_trials, double epsilon2);

// Union bound of a conformal bound against the SMC estimate with the SMC
// estimate's own Chernoff error; targets the exact satisfaction function.
GuaranteeBound combined_bound(const GuaranteeBound& base, int m_trials, double epsilon2);

// Catoni bound at the optimal lambda:
// emp + lambda C^2 / (8n) + (kl + ln(1/eps)) / lambda, lambda* = sqrt(8n(kl+ln(1/eps))/C^2).
double pac_bayes_bound(double empirical_error, double kl, int n, double epsilon, double c = 1.0);

double kl_for_pac(const Posterior& posterior);

struct ExpectedError {
    double mean = 0.0;
    double std_error = 0.0;
};

// E_{f~q}[ (1/N) sum |Lbar_i - f(theta_i)| ] by posterior sampling.
ExpectedError expected_errors(const Posterior& posterior, const Dataset& dataset, int c_samples,
                              std::uint64_t seed);

}  // namespace svsmc
