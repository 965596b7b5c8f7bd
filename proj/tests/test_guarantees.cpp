#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>

#include "svsmc/guarantees.hpp"
#include "svsmc/math.hpp"
#include "svsmc/rng.hpp"

using namespace svsmc;

namespace {

// Deterministic stand-in posterior with prescribed mean/std curves; keeps the
// conformal machinery testable without training a model.
class SyntheticPosterior final : public Posterior {
public:
    SyntheticPosterior(std::function<double(double)> mean, std::function<double(double)> sd,
                       int trials)
        : mean_(std::move(mean)), sd_(std::move(sd)), trials_(trials) {}
    std::string backend() const override { return "synthetic"; }
    int training_trials() const override { return trials_; }
    PosteriorSummary summarize(const std::vector<std::vector<double>>& thetas,
                               const std::vector<double>& probs) const override {
        PosteriorSummary s;
        for (const auto& t : thetas) {
            s.mean.push_back(mean_(t[0]));
            s.stddev.push_back(sd_(t[0]));
        }
        for (double p : probs) {
            std::vector<double> q;
            const double z = normal_quantile(p);
            for (size_t i = 0; i < thetas.size(); ++i)
                q.push_back(std::min(1.0, std::max(0.0, s.mean[i] + z * s.stddev[i])));
            s.quantiles[p] = std::move(q);
        }
        return s;
    }
    Mat sample_predictions(const std::vector<std::vector<double>>& thetas, int c,
                           std::uint64_t seed) const override {
        Mat out(c, static_cast<int>(thetas.size()));
        for (int i = 0; i < c; ++i) {
            Rng rng(derive_seed(seed, i));
            for (size_t j = 0; j < thetas.size(); ++j)
                out(i, static_cast<int>(j)) = std::min(
                    1.0, std::max(0.0, mean_(thetas[j][0]) + sd_(thetas[j][0]) * rng.normal()));
        }
        return out;
    }
    double pac_kl() const override { return 0.0; }
    std::string to_json_text() const override { return "{}"; }

private:
    std::function<double(double)> mean_, sd_;
    int trials_;
};

Dataset synthetic_calibration(const SyntheticPosterior& post, int n, int m_trials,
                              std::uint64_t seed, double noise) {
    // Lbar values scattered around the posterior mean: exchangeable scores.
    Dataset d;
    d.role = DatasetRole::Calibration;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        DataPoint p;
        p.theta = {rng.uniform01()};
        std::vector<std::vector<double>> one{p.theta};
        double mean = post.summarize(one, {}).mean[0];
        double noisy = std::min(1.0, std::max(0.0, mean + noise * rng.normal()));
        p.trials = m_trials;
        p.successes = static_cast<int>(std::lround(noisy * m_trials));
        d.points.push_back(p);
    }
    return d;
}

}  // namespace

TEST_CASE("nonconformity scores: hand case, identity normalizer, trials check") {
    // means (0.2, 0.5, 0.9), Lbar (0.3, 0.5, 0.6), stds (0.1, 0.1, 0.3)
    std::vector<double> means{0.2, 0.5, 0.9}, lbars{0.3, 0.5, 0.6}, stds{0.1, 0.1, 0.3};
    SyntheticPosterior post([&](double t) { return means[static_cast<int>(t)]; },
                            [&](double t) { return stds[static_cast<int>(t)]; }, 10);
    Dataset cal;
    cal.role = DatasetRole::Calibration;
    for (int i = 0; i < 3; ++i) {
        DataPoint p;
        p.theta = {static_cast<double>(i)};
        p.trials = 10;
        p.successes = static_cast<int>(std::lround(lbars[i] * 10));
        cal.points.push_back(p);
    }
    CalibrationScores s = nonconformity_scores(post, cal, ScoreNormalizer::PosteriorStd);
    CHECK(s.raw[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(s.raw[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(s.raw[2] == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(s.normalized[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.normalized[1] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.normalized[2] == doctest::Approx(1.0).epsilon(1e-9));

    CalibrationScores id = nonconformity_scores(post, cal, ScoreNormalizer::Identity);
    CHECK(id.raw == id.normalized);

    // perfect predictor: all raw scores zero
    SyntheticPosterior perfect([&](double t) { return lbars[static_cast<int>(t)]; },
                               [](double) { return 0.05; }, 10);
    CalibrationScores zero = nonconformity_scores(perfect, cal, ScoreNormalizer::Identity);
    for (double v : zero.raw) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    // trials mismatch is a hard error
    SyntheticPosterior wrong([](double) { return 0.5; }, [](double) { return 0.1; }, 99);
    CHECK_THROWS_WITH_AS(nonconformity_scores(wrong, cal, ScoreNormalizer::Identity),
                         doctest::Contains("training trials"), std::invalid_argument);
}

TEST_CASE("conformal quantile rank rule") {
    std::vector<double> scores;
    Rng rng(10);
    for (int i = 0; i < 200; ++i) scores.push_back(rng.uniform01());
    ConformalQuantile q = conformal_quantile(scores, 0.05);
    CHECK(q.rank == 191);
    CHECK(!q.vacuous);
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    CHECK(q.tau == sorted[190]);

    // constant scores give tau = c whenever the rank is attainable
    std::vector<double> constant(50, 0.37);
    CHECK(conformal_quantile(constant, 0.05).tau == 0.37);
    CHECK(conformal_quantile(constant, 0.5).tau == 0.37);

    // too-small calibration set is vacuous
    ConformalQuantile v = conformal_quantile({0.5}, 0.05);
    CHECK(v.vacuous);
    CHECK(std::isinf(v.tau));

    // permutation invariance
    std::vector<double> shuffled = scores;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(conformal_quantile(shuffled, 0.05).tau == q.tau);

    // quantile monotone in epsilon
    CHECK(conformal_quantile(scores, 0.2).tau <= q.tau);

    // brute-force coverage sweep over ranks: 191 is the smallest rank whose
    // expected coverage k/(N+1) reaches 0.95
    const int n = 200;
    const int reps = 4000;
    std::vector<int> cover_k(n + 1, 0);
    for (int r = 0; r < reps; ++r) {
        Rng g(derive_seed(5, r));
        std::vector<double> cal(n);
        for (double& x : cal) x = g.uniform01();
        double fresh = g.uniform01();
        std::sort(cal.begin(), cal.end());
        // fresh score covered by rank k iff fresh <= cal[k-1]
        int pos = static_cast<int>(std::upper_bound(cal.begin(), cal.end(), fresh) - cal.begin());
        for (int k = pos + 1; k <= n; ++k) ++cover_k[k];
    }
    auto coverage = [&](int k) { return static_cast<double>(cover_k[k]) / reps; };
    const double se = std::sqrt(0.95 * 0.05 / reps);
    CHECK(coverage(191) >= 0.95 - 3.0 * se);
    CHECK(coverage(186) < 0.95);  // well below the required rank
}

TEST_CASE("icp and nicp bounds: structure and degenerate cases") {
    SyntheticPosterior post([](double t) { return 0.2 + 0.6 * t; },
                            [](double t) { return 0.05 + 0.1 * t; }, 20);
    Dataset cal = synthetic_calibration(post, 200, 20, 4242, 0.05);

    GuaranteeBound icp = icp_bound(post, cal, 0.05);
    CHECK(icp.kind == BoundKind::Icp);
    CHECK(icp.target == BoundTarget::SmcEstimate);
    CHECK(icp.tau >= 0.0);
    CHECK(icp.half_width(0.123) == icp.tau);  // constant over theta

    GuaranteeBound nicp = nicp_bound(post, cal, 0.05);
    CHECK(nicp.kind == BoundKind::Nicp);
    CHECK(nicp.half_width(0.1) == doctest::Approx(nicp.tau * 0.1));
    // per-point width scales linearly in the std
    CHECK(nicp.half_width(0.2) == doctest::Approx(2.0 * nicp.half_width(0.1)));

    // larger epsilon, smaller tau
    CHECK(icp_bound(post, cal, 0.2).tau <= icp.tau);

    // constant-std posterior: NICP width equals ICP width exactly
    SyntheticPosterior flat([](double t) { return 0.2 + 0.6 * t; }, [](double) { return 0.07; },
                            20);
    Dataset cal2 = synthetic_calibration(flat, 150, 20, 777, 0.04);
    GuaranteeBound i2 = icp_bound(flat, cal2, 0.1);
    GuaranteeBound n2 = nicp_bound(flat, cal2, 0.1);
    CHECK(n2.half_width(0.07) == doctest::Approx(i2.half_width(0.0)).epsilon(1e-12));
}

TEST_CASE("icp/nicp empirical coverage on exchangeable data") {
    SyntheticPosterior post([](double t) { return 0.3 + 0.4 * t; },
                            [](double t) { return 0.04 + 0.08 * t; }, 50);
    int icp_fail = 0, nicp_fail = 0;
    long icp_pool = 0, nicp_pool = 0;
    const int seeds = 20;
    for (int s = 0; s < seeds; ++s) {
        Dataset cal = synthetic_calibration(post, 200, 50, derive_seed(3489, s), 0.06);
        Dataset test = synthetic_calibration(post, 1000, 50, derive_seed(92489, s), 0.06);
        test.role = DatasetRole::Test;
        GuaranteeBound icp = icp_bound(post, cal, 0.05);
        GuaranteeBound nicp = nicp_bound(post, cal, 0.05);
        std::vector<std::vector<double>> thetas;
        for (const auto& p : test.points) thetas.push_back(p.theta);
        PosteriorSummary sum = post.summarize(thetas, {});
        int icp_cov = 0, nicp_cov = 0;
        for (int i = 0; i < test.size(); ++i) {
            const double lbar =
                static_cast<double>(test.points[i].successes) / test.points[i].trials;
            const double err = std::abs(lbar - sum.mean[i]);
            if (err <= icp.half_width(0.0)) ++icp_cov;
            if (err <= nicp.half_width(std::max(sum.stddev[i], kNormalizerFloor))) ++nicp_cov;
        }
        icp_pool += icp_cov;
        nicp_pool += nicp_cov;
        const double floor = 0.95 - 3.0 * std::sqrt(0.95 * 0.05 / 1000.0);
        if (icp_cov / 1000.0 < floor) ++icp_fail;
        if (nicp_cov / 1000.0 < floor) ++nicp_fail;
    }
    CHECK(icp_fail <= 1);
    CHECK(nicp_fail <= 1);
    // pooled coverage over all 20k fresh points: the marginal guarantee
    const double pooled_floor = 0.95 - 3.0 * std::sqrt(0.95 * 0.05 / 20000.0);
    CHECK(static_cast<double>(icp_pool) / 20000.0 >= pooled_floor);
    CHECK(static_cast<double>(nicp_pool) / 20000.0 >= pooled_floor);
}

TEST_CASE("chernoff half width and combination") {
    const double t2 = chernoff_half_width(500, 0.05);
    CHECK(t2 == doctest::Approx(0.0607).epsilon(2e-3));
    CHECK(std::abs(t2 - 0.060737) <= 1e-4);
    // round-trip identity
    CHECK(2.0 * std::exp(-2.0 * 500.0 * t2 * t2) == doctest::Approx(0.05).epsilon(1e-12));
    // more trials, smaller width
    CHECK(chernoff_half_width(5000, 0.05) < t2);
    CHECK(chernoff_half_width(1, 0.9999) > 0.0);

    GuaranteeBound base;
    base.kind = BoundKind::Icp;
    base.epsilon_total = 0.05;
    base.tau = 0.04;
    base.target = BoundTarget::SmcEstimate;
    GuaranteeBound comb = combined_bound(base, 500, 0.05);
    CHECK(comb.kind == BoundKind::IcpChernoff);
    CHECK(comb.target == BoundTarget::ExactSatisfaction);
    CHECK(comb.epsilon_total == doctest::Approx(0.10));
    CHECK(comb.half_width(0.0) == doctest::Approx(0.04 + t2).epsilon(1e-12));
    CHECK(comb.half_width(0.0) == doctest::Approx(0.1007).epsilon(2e-3));

    // perfect base: width is exactly T2
    GuaranteeBound zero = base;
    zero.tau = 0.0;
    CHECK(combined_bound(zero, 500, 0.05).half_width(0.0) == doctest::Approx(t2));

    // vacuous when significance exceeds one
    GuaranteeBound fat = base;
    fat.epsilon_total = 0.7;
    CHECK(combined_bound(fat, 10, 0.5).vacuous);
    CHECK_THROWS_AS(combined_bound(comb, 10, 0.05), std::invalid_argument);
}

TEST_CASE("pac-bayes closed form, grid minimum, monotonicity") {
    // kl = 0: emp + sqrt(ln(1/eps)/(2n))
    const double b = pac_bayes_bound(0.1, 0.0, 100, 0.05, 1.0);
    CHECK(b == doctest::Approx(0.1 + std::sqrt(std::log(20.0) / 200.0)).epsilon(1e-12));
    CHECK(b == doctest::Approx(0.1 + 0.1224).epsilon(1e-3));

    // closed form equals the minimum over a lambda grid
    for (double kl : {0.0, 0.5, 3.0, 40.0}) {
        const int n = 137;
        const double eps = 0.07, c = 1.0;
        const double closed = pac_bayes_bound(0.2, kl, n, eps, c);
        double best = 1e300;
        const double num = kl + std::log(1.0 / eps);
        for (int i = 0; i <= 2000000; ++i) {
            const double lam = 1e-3 + i * 0.01;
            const double v = 0.2 + lam * c * c / (8.0 * n) + num / lam;
            best = std::min(best, v);
        }
        CHECK(closed <= best + 1e-6);
        CHECK(closed >= best - 1e-6);
    }

    // limits and monotonicity
    CHECK(pac_bayes_bound(0.3, 1.0, 1000000000, 0.05) == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(pac_bayes_bound(0.3, 2.0, 100, 0.05) > pac_bayes_bound(0.3, 1.0, 100, 0.05));
    CHECK(pac_bayes_bound(0.3, 1.0, 100, 0.01) > pac_bayes_bound(0.3, 1.0, 100, 0.1));
}

TEST_CASE("expected errors over a dataset") {
    // predictor equal to Lbar everywhere with zero spread: zero error
    SyntheticPosterior perfect([](double) { return 0.5; }, [](double) { return 1e-9; }, 10);
    Dataset d;
    d.role = DatasetRole::Test;
    for (int i = 0; i < 20; ++i) {
        DataPoint p;
        p.theta = {0.1 * (i % 10)};
        p.trials = 10;
        p.successes = 5;
        d.points.push_back(p);
    }
    ExpectedError e = expected_errors(perfect, d, 100, 1);
    CHECK(e.mean <= 1e-6);

    // stochastic predictor: nonnegative error, standard error shrinks ~ 1/sqrt(C)
    SyntheticPosterior noisy([](double) { return 0.5; }, [](double) { return 0.1; }, 10);
    ExpectedError e1 = expected_errors(noisy, d, 50, 2);
    ExpectedError e2 = expected_errors(noisy, d, 5000, 2);
    CHECK(e1.mean >= 0.0);
    const double slope = std::log(e2.std_error / e1.std_error) / std::log(5000.0 / 50.0);
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.3));
}
