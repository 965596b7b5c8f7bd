#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "svsmc/math.hpp"
#include "svsmc/metrics.hpp"
#include "svsmc/rng.hpp"

using namespace svsmc;

namespace {

class FixedPosterior final : public Posterior {
public:
    FixedPosterior(double mean, double halfwidth, int trials)
        : mean_(mean), hw_(halfwidth), trials_(trials) {}
    std::string backend() const override { return "synthetic"; }
    int training_trials() const override { return trials_; }
    PosteriorSummary summarize(const std::vector<std::vector<double>>& thetas,
                               const std::vector<double>& probs) const override {
        PosteriorSummary s;
        s.mean.assign(thetas.size(), mean_);
        s.stddev.assign(thetas.size(), hw_ / 2.0);
        for (double p : probs) {
            double v = p < 0.5 ? mean_ - hw_ : (p > 0.5 ? mean_ + hw_ : mean_);
            s.quantiles[p] = std::vector<double>(thetas.size(), v);
        }
        return s;
    }
    Mat sample_predictions(const std::vector<std::vector<double>>& thetas, int c,
                           std::uint64_t) const override {
        return Mat(c, static_cast<int>(thetas.size()), mean_);
    }
    double pac_kl() const override { return 0.0; }
    std::string to_json_text() const override { return "{}"; }

private:
    double mean_, hw_;
    int trials_;
};

Dataset two_point_dataset() {
    Dataset d;
    d.role = DatasetRole::Test;
    DataPoint a;
    a.theta = {0.1};
    a.successes = 0;
    a.trials = 10;
    DataPoint b;
    b.theta = {0.9};
    b.successes = 10;
    b.trials = 10;
    d.points = {a, b};
    return d;
}

}  // namespace

TEST_CASE("rmse on alternating 0/1 targets with a 0.5 predictor") {
    FixedPosterior post(0.5, 0.1, 10);
    Dataset d = two_point_dataset();
    CHECK(rmse(post, d) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rmse(post, d) <= 1.0);

    // perfect predictor
    Dataset same = d;
    same.points[0].successes = 5;
    same.points[1].successes = 5;
    CHECK(rmse(post, same) == doctest::Approx(0.0).epsilon(1e-12));
    Dataset empty;
    CHECK_THROWS_AS(rmse(post, empty), std::invalid_argument);
}

TEST_CASE("accuracy counts interval intersections") {
    Dataset d = two_point_dataset();
    // wide credible interval covering everything: both points intersect
    FixedPosterior wide(0.5, 0.6, 10);
    CHECK(accuracy(wide, d, 0.05, 1.96) == doctest::Approx(1.0));
    // disjoint everywhere: mean 0.5 with tiny intervals, SMC at 0 and 1 with zero std
    FixedPosterior narrow(0.5, 0.001, 10);
    CHECK(accuracy(narrow, d, 0.05, 1.96) == doctest::Approx(0.0));
    // widening intervals cannot decrease accuracy
    FixedPosterior mid(0.5, 0.3, 10);
    CHECK(accuracy(mid, d, 0.05, 1.96) >= accuracy(narrow, d, 0.05, 1.96));
}

TEST_CASE("uncertainty width and SMC companion") {
    Dataset d = two_point_dataset();
    FixedPosterior post(0.5, 0.2, 10);
    EvaluationReport rep = evaluate(post, d, 0.05, 1.96);
    CHECK(rep.uncertainty_width == doctest::Approx(0.4).epsilon(1e-12));
    // SMC halfwidth is z * std / sqrt(M); std is zero at 0/10 and 10/10
    CHECK(rep.test_uncertainty_width == doctest::Approx(0.0).epsilon(1e-12));

    FixedPosterior degenerate(0.5, 0.0, 10);
    CHECK(uncertainty_width(degenerate, d, 0.05) == doctest::Approx(0.0));

    // permutation invariance
    Dataset swapped = d;
    std::swap(swapped.points[0], swapped.points[1]);
    EvaluationReport rep2 = evaluate(post, swapped, 0.05, 1.96);
    CHECK(rep2.rmse == doctest::Approx(rep.rmse));
    CHECK(rep2.accuracy == doctest::Approx(rep.accuracy));
    CHECK(rep2.uncertainty_width == doctest::Approx(rep.uncertainty_width));
}

TEST_CASE("report files are written and well formed") {
    namespace fs = std::filesystem;
    Dataset d = two_point_dataset();
    FixedPosterior post(0.5, 0.2, 10);
    EvaluationReport rep = evaluate(post, d, 0.05, 1.96);
    fs::path dir = fs::temp_directory_path() / "svsmc_metrics_test";
    fs::create_directories(dir);
    write_report(rep, (dir / "report.json").string(), (dir / "pp.csv").string());
    std::ifstream jin(dir / "report.json");
    std::string text((std::istreambuf_iterator<char>(jin)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"rmse\"") != std::string::npos);
    CHECK(text.find("\"accuracy\"") != std::string::npos);
    std::ifstream cin(dir / "pp.csv");
    std::string header;
    std::getline(cin, header);
    CHECK(header == "theta_0,lbar,smc_lo,smc_hi,pred_mean,cred_lo,cred_hi");
    int rows = 0;
    std::string line;
    while (std::getline(cin, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
    fs::remove_all(dir);
}
