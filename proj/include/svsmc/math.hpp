#pragma once

#include <cstddef>
#include <vector>

namespace svsmc {

inline constexpr double kProbClip = 1e-12;

double normal_pdf(double x);
double normal_cdf(double x);
// Inverse standard normal CDF, |error| < 1e-13 after Newton polish.
double normal_quantile(double p);

// log C(n, k) via lgamma.
double log_binomial_coefficient(int n, int k);
// log Binomial(k | n, p); p is clipped to [kProbClip, 1-kProbClip].
double binomial_log_pmf(int k, int n, double p);

// Gauss-Hermite rule for weight exp(-t^2); sum of weights is sqrt(pi).
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
    explicit GaussHermite(int n);
};

// E_{g ~ N(mean, var)}[h(g)] for h given at the transformed nodes.
// Callers evaluate h at mean + sqrt(2 var) * nodes[j] and weight by
// weights[j] / sqrt(pi).

// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);
// Chi-square CDF with k degrees of freedom.
double chi_square_cdf(double x, double k);

}  // namespace svsmc
