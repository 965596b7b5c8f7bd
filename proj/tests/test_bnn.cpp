#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "svsmc/bnn.hpp"
#include "svsmc/posterior.hpp"
#include "svsmc/rng.hpp"

using namespace svsmc;

namespace {

Dataset constant_dataset(int n, int successes, int trials, Rng& rng,
                         const std::vector<ParamInterval>& space) {
    Dataset d;
    d.role = DatasetRole::Train;
    for (int i = 0; i < n; ++i) {
        DataPoint p;
        p.theta = {rng.uniform(space[0].lo, space[0].hi)};
        p.successes = successes;
        p.trials = trials;
        d.points.push_back(p);
    }
    return scale_inputs(d, space);
}

WeightPosterior tiny_posterior(int d, const std::vector<int>& hidden, Rng& rng) {
    WeightPosterior post;
    post.arch.input_dim = d;
    post.arch.hidden = hidden;
    post.arch.leaky_slope = 0.01;
    for (int l = 0; l < post.arch.layer_count(); ++l) {
        Mat mw(post.arch.fan_in(l), post.arch.fan_out(l));
        for (double& x : mw.vec()) x = 0.4 * rng.normal();
        Mat mb(1, post.arch.fan_out(l));
        for (double& x : mb.vec()) x = 0.2 * rng.normal();
        post.mu.w.push_back(mw);
        post.mu.b.push_back(mb);
        post.rho.w.push_back(Mat(post.arch.fan_in(l), post.arch.fan_out(l), std::log(0.3)));
        post.rho.b.push_back(Mat(1, post.arch.fan_out(l), std::log(0.3)));
        post.prior.center.w.push_back(Mat(post.arch.fan_in(l), post.arch.fan_out(l)));
        post.prior.center.b.push_back(Mat(1, post.arch.fan_out(l)));
        post.prior.std_per_layer.push_back(1.0);
    }
    post.training_trials = 5;
    return post;
}

}  // namespace

TEST_CASE("forward pass: zero network and hand-computed tiny case") {
    BnnArchitecture arch;
    arch.input_dim = 1;
    arch.hidden = {2};
    BnnWeights w;
    w.w = {Mat(1, 2), Mat(2, 1)};
    w.b = {Mat(1, 2), Mat(1, 1)};
    Mat x(1, 1);
    x(0, 0) = 0.7;
    Mat out = bnn_forward(arch, w, x);
    CHECK(out(0, 0) == doctest::Approx(0.5).epsilon(1e-15));  // sigmoid(0)

    // hand-set weights: h = leaky(x*W1 + b1), f = sigmoid(h.W2 + b2)
    w.w[0](0, 0) = 1.5;
    w.w[0](0, 1) = -2.0;
    w.b[0](0, 0) = 0.1;
    w.b[0](0, 1) = 0.2;
    w.w[1](0, 0) = 0.7;
    w.w[1](1, 0) = -0.3;
    w.b[1](0, 0) = 0.05;
    const double h0 = 0.7 * 1.5 + 0.1;
    const double h1_pre = 0.7 * -2.0 + 0.2;
    const double h1 = h1_pre * 0.01;  // leaky slope
    const double z = h0 * 0.7 + h1 * -0.3 + 0.05;
    const double expect = 1.0 / (1.0 + std::exp(-z));
    Mat out2 = bnn_forward(arch, w, x);
    CHECK(out2(0, 0) == doctest::Approx(expect).epsilon(1e-12));

    // output is monotone in the final bias
    w.b[1](0, 0) = 1.0;
    CHECK(bnn_forward(arch, w, x)(0, 0) > out2(0, 0));
}

TEST_CASE("kl_weights closed form") {
    Rng rng(1);
    WeightPosterior post = tiny_posterior(1, {2}, rng);
    // posterior equal to prior: zero
    for (int l = 0; l < post.arch.layer_count(); ++l) {
        post.mu.w[l] = post.prior.center.w[l];
        post.mu.b[l] = post.prior.center.b[l];
        for (double& x : post.rho.w[l].vec()) x = std::log(post.prior.std_per_layer[l]);
        for (double& x : post.rho.b[l].vec()) x = std::log(post.prior.std_per_layer[l]);
    }
    CHECK(kl_weights(post) == doctest::Approx(0.0).epsilon(1e-14));

    // one weight at N(1,1) against N(0,1): adds exactly 0.5
    post.mu.w[0](0, 0) = 1.0;
    CHECK(kl_weights(post) == doctest::Approx(0.5).epsilon(1e-14));
    post.mu.w[0](0, 0) = 3.0;
    CHECK(kl_weights(post) >= 0.0);
}

TEST_CASE("elbo with fixed noise matches finite differences") {
    Rng rng(2);
    WeightPosterior post = tiny_posterior(2, {3}, rng);
    Mat X(4, 2);
    for (double& x : X.vec()) x = rng.uniform(-1.0, 1.0);
    std::vector<int> succ{1, 3, 0, 5}, tri{5, 5, 5, 5};
    BnnWeights noise;
    for (int l = 0; l < post.arch.layer_count(); ++l) {
        Mat nw(post.arch.fan_in(l), post.arch.fan_out(l));
        for (double& x : nw.vec()) x = rng.normal();
        Mat nb(1, post.arch.fan_out(l));
        for (double& x : nb.vec()) x = rng.normal();
        noise.w.push_back(nw);
        noise.b.push_back(nb);
    }
    BnnGradients g;
    elbo_bnn_fixed_noise(post, X, succ, tri, 4, noise, &g);

    const double h = 1e-5;
    auto fd = [&](auto&& bump) {
        WeightPosterior p = post, m = post;
        bump(p, +h);
        bump(m, -h);
        return (elbo_bnn_fixed_noise(p, X, succ, tri, 4, noise) -
                elbo_bnn_fixed_noise(m, X, succ, tri, 4, noise)) /
               (2.0 * h);
    };
    for (int l = 0; l < post.arch.layer_count(); ++l) {
        for (int i = 0; i < post.mu.w[l].rows(); ++i)
            for (int j = 0; j < post.mu.w[l].cols(); ++j) {
                double v = fd([&](WeightPosterior& q, double e) { q.mu.w[l](i, j) += e; });
                CHECK(std::abs(v - g.mu.w[l](i, j)) <=
                      1e-3 * std::max(1.0, std::abs(v)));
                double vr = fd([&](WeightPosterior& q, double e) { q.rho.w[l](i, j) += e; });
                CHECK(std::abs(vr - g.rho.w[l](i, j)) <=
                      1e-3 * std::max(1.0, std::abs(vr)));
            }
        for (int j = 0; j < post.mu.b[l].cols(); ++j) {
            double v = fd([&](WeightPosterior& q, double e) { q.mu.b[l](0, j) += e; });
            CHECK(std::abs(v - g.mu.b[l](0, j)) <= 1e-3 * std::max(1.0, std::abs(v)));
            double vr = fd([&](WeightPosterior& q, double e) { q.rho.b[l](0, j) += e; });
            CHECK(std::abs(vr - g.rho.b[l](0, j)) <= 1e-3 * std::max(1.0, std::abs(vr)));
        }
    }
}

TEST_CASE("pretrained prior hits a constant target and sets 1/m stds") {
    Rng rng(3);
    std::vector<ParamInterval> space{{0.1, 1.0}};
    Dataset train = constant_dataset(20, 8, 8, rng, space);
    BnnArchitecture arch;
    arch.input_dim = 1;
    arch.hidden = {8, 8, 8};
    BnnConfig cfg;
    cfg.hidden = arch.hidden;
    cfg.pretrain_epochs = 300;
    cfg.batch_size = 20;
    cfg.learning_rate = 0.01;
    cfg.seed = 7;
    BnnPrior prior = pretrain_prior(train, arch, cfg);
    Mat X(10, 1);
    for (int i = 0; i < 10; ++i) X(i, 0) = -0.9 + 0.2 * i;
    Mat f = bnn_forward(arch, prior.center, X);
    for (int i = 0; i < 10; ++i) CHECK(f(i, 0) >= 0.95);
    for (double s : prior.std_per_layer) CHECK(s == doctest::Approx(1.0 / 8.0));

    // width-64 layer gets 1/64
    BnnArchitecture wide;
    wide.input_dim = 1;
    wide.hidden = {64, 64, 64};
    CHECK(wide.prior_std(0) == doctest::Approx(1.0 / 64.0));
    CHECK(wide.prior_std(3) == doctest::Approx(1.0 / 64.0));

    // determinism
    BnnPrior p2 = pretrain_prior(train, arch, cfg);
    for (int l = 0; l < arch.layer_count(); ++l)
        CHECK(p2.center.w[l].vec() == prior.center.w[l].vec());
}

TEST_CASE("train_bnn learns, is deterministic, and lr=0 freezes initialization") {
    Rng rng(4);
    std::vector<ParamInterval> space{{0.1, 1.0}};
    Dataset train = constant_dataset(30, 10, 10, rng, space);
    BnnConfig cfg;
    cfg.hidden = {8, 8, 8};
    cfg.epochs = 200;
    cfg.pretrain_epochs = 200;
    cfg.batch_size = 30;
    cfg.learning_rate = 0.01;
    cfg.seed = 11;
    cfg.predict_samples = 200;
    WeightPosterior post = train_bnn(train, cfg);
    std::vector<std::vector<double>> grid;
    for (double t = 0.15; t < 1.0; t += 0.1) grid.push_back({t});
    BnnPrediction pred = predict_bnn(post, grid, 400, 99);
    for (double m : pred.mean) CHECK(m >= 0.9);

    // smoothed ELBO at the end is no worse than at the start
    const auto& trace = post.diagnostics.elbo_trace;
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 20; ++i) {
        head += trace[i];
        tail += trace[trace.size() - 1 - i];
    }
    CHECK(tail >= head);

    WeightPosterior again = train_bnn(train, cfg);
    for (int l = 0; l < post.arch.layer_count(); ++l)
        CHECK(again.mu.w[l].vec() == post.mu.w[l].vec());

    BnnConfig frozen = cfg;
    frozen.learning_rate = 0.0;
    frozen.epochs = 5;
    WeightPosterior f = train_bnn(train, frozen);
    for (int l = 0; l < f.arch.layer_count(); ++l) {
        CHECK(f.mu.w[l].vec() == f.prior.center.w[l].vec());
        for (double r : f.rho.w[l].vec())
            CHECK(r == doctest::Approx(std::log(f.prior.std_per_layer[l])).epsilon(1e-12));
    }
}

TEST_CASE("predictive samples: determinism, range, degenerate stds, quantiles") {
    Rng rng(5);
    WeightPosterior post = tiny_posterior(1, {4}, rng);
    post.scaling = scaling_from_space({{0.0, 1.0}});
    std::vector<std::vector<double>> pts{{0.2}, {0.8}};
    Mat s1 = predict_bnn_samples(post, pts, 64, 1234);
    Mat s2 = predict_bnn_samples(post, pts, 64, 1234);
    CHECK(s1.vec() == s2.vec());
    for (double v : s1.vec()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    CHECK_THROWS_AS(predict_bnn_samples(post, pts, 1, 1), std::invalid_argument);

    // stds -> 0: all samples identical
    for (int l = 0; l < post.arch.layer_count(); ++l) {
        for (double& x : post.rho.w[l].vec()) x = -40.0;
        for (double& x : post.rho.b[l].vec()) x = -40.0;
    }
    Mat s3 = predict_bnn_samples(post, pts, 16, 7);
    for (int j = 0; j < 2; ++j)
        for (int i = 1; i < 16; ++i) CHECK(s3(i, j) == doctest::Approx(s3(0, j)).epsilon(1e-12));
    BnnPrediction degen = predict_bnn(post, pts, 16, 7);
    CHECK(degen.stddev[0] == doctest::Approx(0.0).epsilon(1e-12));

    // quantiles are monotone in p
    Rng rng2(6);
    WeightPosterior post2 = tiny_posterior(1, {4}, rng2);
    post2.scaling = scaling_from_space({{0.0, 1.0}});
    Mat s4 = predict_bnn_samples(post2, pts, 500, 42);
    auto q1 = column_quantile(s4, 0.1);
    auto q5 = column_quantile(s4, 0.5);
    auto q9 = column_quantile(s4, 0.9);
    for (int j = 0; j < 2; ++j) {
        CHECK(q1[j] <= q5[j]);
        CHECK(q5[j] <= q9[j]);
    }
}

TEST_CASE("predictive mean standard error shrinks like 1/sqrt(C)") {
    Rng rng(8);
    WeightPosterior post = tiny_posterior(1, {6}, rng);
    post.scaling = scaling_from_space({{0.0, 1.0}});
    std::vector<std::vector<double>> pt{{0.5}};
    // spread of the mean over independent repetitions at two sample counts
    auto spread = [&](int c, int reps) {
        std::vector<double> means;
        for (int r = 0; r < reps; ++r) {
            Mat s = predict_bnn_samples(post, pt, c, derive_seed(100, r, c));
            double acc = 0.0;
            for (int i = 0; i < c; ++i) acc += s(i, 0);
            means.push_back(acc / c);
        }
        double mu = 0.0;
        for (double m : means) mu += m;
        mu /= reps;
        double v = 0.0;
        for (double m : means) v += (m - mu) * (m - mu);
        return std::sqrt(v / (reps - 1));
    };
    const double s16 = spread(16, 220);
    const double s256 = spread(256, 220);
    const double slope = std::log(s256 / s16) / std::log(256.0 / 16.0);
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.25));

    // CLT self-consistency of two independent big draws
    const int c = 20000;
    Mat a = predict_bnn_samples(post, pt, c, 1), b = predict_bnn_samples(post, pt, c, 2);
    double ma = 0, mb = 0, va = 0;
    for (int i = 0; i < c; ++i) {
        ma += a(i, 0);
        mb += b(i, 0);
    }
    ma /= c;
    mb /= c;
    for (int i = 0; i < c; ++i) va += (a(i, 0) - ma) * (a(i, 0) - ma);
    va = std::sqrt(va / (c - 1));
    CHECK(std::abs(ma - mb) <= 3.0 * va / std::sqrt(static_cast<double>(c)) * std::sqrt(2.0));
}

TEST_CASE("bnn posterior serialization round trip") {
    Rng rng(9);
    std::vector<ParamInterval> space{{0.1, 1.0}};
    Dataset train = constant_dataset(12, 3, 6, rng, space);
    BnnConfig cfg;
    cfg.hidden = {4, 4, 4};
    cfg.epochs = 20;
    cfg.pretrain_epochs = 20;
    cfg.batch_size = 12;
    cfg.seed = 3;
    cfg.predict_samples = 50;
    BnnPosteriorModel model(train_bnn(train, cfg));
    auto back = posterior_from_json_text(model.to_json_text());
    CHECK(back->backend() == "bnn");
    std::vector<std::vector<double>> pts{{0.4}};
    auto sa = model.summarize(pts, {0.5});
    auto sb = back->summarize(pts, {0.5});
    CHECK(sa.mean[0] == doctest::Approx(sb.mean[0]).epsilon(1e-14));
    CHECK(sa.quantiles.at(0.5)[0] == doctest::Approx(sb.quantiles.at(0.5)[0]).epsilon(1e-14));
    CHECK(model.pac_kl() == doctest::Approx(back->pac_kl()).epsilon(1e-12));
}
