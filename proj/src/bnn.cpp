#include "svsmc/bnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "svsmc/autodiff.hpp"
#include "svsmc/optim.hpp"

namespace svsmc {

long long BnnArchitecture::parameter_count() const {
    long long total = 0;
    for (int l = 0; l < layer_count(); ++l)
        total += static_cast<long long>(fan_in(l)) * fan_out(l) + fan_out(l);
    return total;
}

Mat bnn_forward(const BnnArchitecture& arch, const BnnWeights& weights, const Mat& X) {
    if (X.cols() != arch.input_dim) throw std::invalid_argument("bnn_forward: input dimension mismatch");
    Mat h = X;
    for (int l = 0; l < arch.layer_count(); ++l) {
        Mat z = matmul(h, weights.w[l]);
        for (int i = 0; i < z.rows(); ++i)
            for (int j = 0; j < z.cols(); ++j) z(i, j) += weights.b[l](0, j);
        if (l + 1 < arch.layer_count()) {
            for (double& x : z.vec())
                if (x < 0.0) x *= arch.leaky_slope;
        } else {
            for (double& x : z.vec()) x = 1.0 / (1.0 + std::exp(-x));
        }
        h = std::move(z);
    }
    return h;
}

double kl_weights(const WeightPosterior& posterior) {
    double kl = 0.0;
    auto accum = [&](const Mat& mu, const Mat& rho, const Mat& center, double s0) {
        for (size_t i = 0; i < mu.size(); ++i) {
            const double s = std::exp(rho.vec()[i]);
            const double dm = mu.vec()[i] - center.vec()[i];
            kl += std::log(s0) - rho.vec()[i] + (s * s + dm * dm) / (2.0 * s0 * s0) - 0.5;
        }
    };
    for (int l = 0; l < posterior.arch.layer_count(); ++l) {
        const double s0 = posterior.prior.std_per_layer[l];
        accum(posterior.mu.w[l], posterior.rho.w[l], posterior.prior.center.w[l], s0);
        accum(posterior.mu.b[l], posterior.rho.b[l], posterior.prior.center.b[l], s0);
    }
    return kl;
}

namespace {

BnnWeights sample_noise(const BnnArchitecture& arch, Rng& rng) {
    BnnWeights xi;
    for (int l = 0; l < arch.layer_count(); ++l) {
        Mat w(arch.fan_in(l), arch.fan_out(l));
        for (double& x : w.vec()) x = rng.normal();
        Mat b(1, arch.fan_out(l));
        for (double& x : b.vec()) x = rng.normal();
        xi.w.push_back(std::move(w));
        xi.b.push_back(std::move(b));
    }
    return xi;
}

struct BnnGraph {
    ad::Tape tape;
    std::vector<int> mu_w, mu_b, rho_w, rho_b;
    int elbo = -1;
};

void build_bnn_graph(BnnGraph& g, const WeightPosterior& post, const Mat& X,
                     const std::vector<int>& succ, const std::vector<int>& trials, int n_total,
                     const std::vector<BnnWeights>& noises) {
    ad::Tape& t = g.tape;
    t.clear();
    g.mu_w.clear();
    g.mu_b.clear();
    g.rho_w.clear();
    g.rho_b.clear();
    const BnnArchitecture& arch = post.arch;
    const int L = arch.layer_count();
    for (int l = 0; l < L; ++l) {
        g.mu_w.push_back(t.leaf(post.mu.w[l]));
        g.rho_w.push_back(t.leaf(post.rho.w[l]));
        g.mu_b.push_back(t.leaf(post.mu.b[l]));
        g.rho_b.push_back(t.leaf(post.rho.b[l]));
    }
    const int x = t.constant(X);
    int ll_total = -1;
    for (const BnnWeights& xi : noises) {
        int h = x;
        for (int l = 0; l < L; ++l) {
            int w = t.add(g.mu_w[l], t.mul_elem(t.exp_elem(g.rho_w[l]), t.constant(xi.w[l])));
            int b = t.add(g.mu_b[l], t.mul_elem(t.exp_elem(g.rho_b[l]), t.constant(xi.b[l])));
            h = t.dense_layer(h, w, b);
            h = (l + 1 < L) ? t.leaky_relu(h, arch.leaky_slope) : t.sigmoid(h);
        }
        int ll = t.binomial_log_lik(h, succ, trials);
        ll_total = ll_total < 0 ? ll : t.add(ll_total, ll);
    }
    int kl = -1;
    for (int l = 0; l < L; ++l) {
        const double s0 = post.prior.std_per_layer[l];
        auto flat = [](const Mat& m) { return std::vector<double>(m.vec()); };
        int kw = t.gaussian_kl(g.mu_w[l], g.rho_w[l], flat(post.prior.center.w[l]),
                               std::vector<double>(post.prior.center.w[l].size(), s0));
        int kb = t.gaussian_kl(g.mu_b[l], g.rho_b[l], flat(post.prior.center.b[l]),
                               std::vector<double>(post.prior.center.b[l].size(), s0));
        int both = t.add(kw, kb);
        kl = kl < 0 ? both : t.add(kl, both);
    }
    const double scale =
        static_cast<double>(n_total) / (X.rows() * static_cast<double>(noises.size()));
    g.elbo = t.sub(t.affine_scalar(ll_total, scale, 0.0), kl);
}

}  // namespace

double elbo_bnn(const WeightPosterior& posterior, const Mat& X, const std::vector<int>& successes,
                const std::vector<int>& trials, int n_total, int n_mc, Rng& rng) {
    if (n_mc < 1) throw std::invalid_argument("elbo_bnn: n_mc must be >= 1");
    std::vector<BnnWeights> noises;
    for (int i = 0; i < n_mc; ++i) noises.push_back(sample_noise(posterior.arch, rng));
    BnnGraph g;
    build_bnn_graph(g, posterior, X, successes, trials, n_total, noises);
    const double v = g.tape.val(g.elbo)(0, 0);
    if (!std::isfinite(v)) throw std::runtime_error("elbo_bnn: non-finite value");
    return v;
}

double elbo_bnn_fixed_noise(const WeightPosterior& posterior, const Mat& X,
                            const std::vector<int>& successes, const std::vector<int>& trials,
                            int n_total, const BnnWeights& noise, BnnGradients* grads) {
    std::vector<BnnWeights> noises{noise};
    BnnGraph g;
    build_bnn_graph(g, posterior, X, successes, trials, n_total, noises);
    const double v = g.tape.val(g.elbo)(0, 0);
    if (grads) {
        g.tape.backward(g.elbo);
        grads->value = v;
        grads->mu.w.clear();
        grads->mu.b.clear();
        grads->rho.w.clear();
        grads->rho.b.clear();
        for (int l = 0; l < posterior.arch.layer_count(); ++l) {
            grads->mu.w.push_back(g.tape.grad(g.mu_w[l]));
            grads->mu.b.push_back(g.tape.grad(g.mu_b[l]));
            grads->rho.w.push_back(g.tape.grad(g.rho_w[l]));
            grads->rho.b.push_back(g.tape.grad(g.rho_b[l]));
        }
    }
    return v;
}

namespace {

void flatten(const BnnWeights& w, std::vector<double>& out) {
    for (const Mat& m : w.w) out.insert(out.end(), m.vec().begin(), m.vec().end());
    for (const Mat& m : w.b) out.insert(out.end(), m.vec().begin(), m.vec().end());
}

void unflatten(const std::vector<double>& flat, size_t& offset, BnnWeights& w) {
    for (Mat& m : w.w) {
        std::copy_n(flat.begin() + offset, m.size(), m.vec().begin());
        offset += m.size();
    }
    for (Mat& m : w.b) {
        std::copy_n(flat.begin() + offset, m.size(), m.vec().begin());
        offset += m.size();
    }
}

BnnWeights init_weights(const BnnArchitecture& arch, Rng& rng, bool random) {
    BnnWeights w;
    for (int l = 0; l < arch.layer_count(); ++l) {
        Mat wm(arch.fan_in(l), arch.fan_out(l));
        if (random) {
            const double s = 1.0 / std::sqrt(static_cast<double>(arch.fan_in(l)));
            for (double& x : wm.vec()) x = s * rng.normal();
        }
        w.w.push_back(std::move(wm));
        w.b.push_back(Mat(1, arch.fan_out(l)));
    }
    return w;
}

}  // namespace

BnnPrior pretrain_prior(const Dataset& train, const BnnArchitecture& arch,
                        const BnnConfig& config) {
    if (train.role != DatasetRole::Train)
        throw std::invalid_argument("pretrain_prior: dataset role must be train");
    const int n = train.size();
    Rng rng(config.seed, tag_hash("bnn-pretrain"));
    BnnWeights weights = init_weights(arch, rng, true);

    std::vector<double> params;
    flatten(weights, params);
    Adam opt(config.learning_rate);

    Rng shuffle_rng(config.seed, tag_hash("bnn-pretrain-batches"));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const int d = train.dim();

    ad::Tape tape;
    for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i],
                      order[static_cast<int>(shuffle_rng.below(static_cast<std::uint32_t>(i + 1)))]);
        for (int start = 0; start < n; start += config.batch_size) {
            const int stop = std::min(n, start + config.batch_size);
            const int bs = stop - start;
            Mat X(bs, d);
            std::vector<int> succ(bs), tri(bs);
            for (int i = 0; i < bs; ++i) {
                const DataPoint& p = train.points[order[start + i]];
                for (int j = 0; j < d; ++j) X(i, j) = p.theta[j];
                succ[i] = p.successes;
                tri[i] = p.trials;
            }
            tape.clear();
            std::vector<int> w_ids, b_ids;
            for (int l = 0; l < arch.layer_count(); ++l) {
                w_ids.push_back(tape.leaf(weights.w[l]));
                b_ids.push_back(tape.leaf(weights.b[l]));
            }
            int h = tape.constant(X);
            for (int l = 0; l < arch.layer_count(); ++l) {
                h = tape.dense_layer(h, w_ids[l], b_ids[l]);
                h = (l + 1 < arch.layer_count()) ? tape.leaky_relu(h, arch.leaky_slope)
                                                 : tape.sigmoid(h);
            }
            int ll = tape.binomial_log_lik(h, succ, tri);
            tape.backward(ll);
            if (!std::isfinite(tape.val(ll)(0, 0)))
                throw std::runtime_error("pretrain_prior: non-finite loss");
            std::vector<double> grads;
            BnnWeights gw;
            for (int l = 0; l < arch.layer_count(); ++l) gw.w.push_back(tape.grad(w_ids[l]));
            for (int l = 0; l < arch.layer_count(); ++l) gw.b.push_back(tape.grad(b_ids[l]));
            flatten(gw, grads);
            opt.step(params, grads);
            size_t off = 0;
            unflatten(params, off, weights);
        }
    }

    BnnPrior prior;
    prior.center = std::move(weights);
    for (int l = 0; l < arch.layer_count(); ++l) prior.std_per_layer.push_back(arch.prior_std(l));
    return prior;
}

WeightPosterior train_bnn(const Dataset& train, const BnnConfig& config) {
    if (train.role != DatasetRole::Train)
        throw std::invalid_argument("train_bnn: dataset role must be train");
    if (!train.scaled) throw std::invalid_argument("train_bnn: dataset must be scaled");
    train.check_invariants();
    const auto t0 = std::chrono::steady_clock::now();
    const int n = train.size();
    const int d = train.dim();

    BnnArchitecture arch;
    arch.input_dim = d;
    arch.hidden = config.hidden;
    arch.leaky_slope = config.leaky_slope;

    WeightPosterior post;
    post.arch = arch;
    post.scaling = train.scaling;
    post.training_trials = train.trials();
    post.predict_samples = config.predict_samples;
    post.predict_seed = derive_seed(config.seed, tag_hash("bnn-predict"));
    post.training_inputs = Mat(n, d);
    post.training_successes.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) post.training_inputs(i, j) = train.points[i].theta[j];
        post.training_successes[i] = train.points[i].successes;
    }
    if (config.pretrain) {
        post.prior = pretrain_prior(train, arch, config);
        post.pretrained_prior = true;
    } else {
        Rng dummy(0);
        post.prior.center = init_weights(arch, dummy, false);
        post.prior.std_per_layer.assign(arch.layer_count(), 1.0);
        post.pretrained_prior = false;
    }

    // Start the variational distribution at the prior.
    post.mu = post.prior.center;
    for (int l = 0; l < arch.layer_count(); ++l) {
        const double lr = std::log(post.prior.std_per_layer[l]);
        post.rho.w.push_back(Mat(arch.fan_in(l), arch.fan_out(l), lr));
        post.rho.b.push_back(Mat(1, arch.fan_out(l), lr));
    }

    std::vector<double> params;
    flatten(post.mu, params);
    flatten(post.rho, params);
    auto unpack_all = [&]() {
        size_t off = 0;
        unflatten(params, off, post.mu);
        unflatten(params, off, post.rho);
    };
    Adam opt(config.learning_rate);

    Rng noise_rng(config.seed, tag_hash("bnn-noise"));
    Rng shuffle_rng(config.seed, tag_hash("bnn-batches"));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    BnnGraph graph;
    post.diagnostics.elbo_trace.reserve(config.epochs);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i)
            std::swap(order[i],
                      order[static_cast<int>(shuffle_rng.below(static_cast<std::uint32_t>(i + 1)))]);
        double epoch_elbo = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += config.batch_size) {
            const int stop = std::min(n, start + config.batch_size);
            const int bs = stop - start;
            Mat X(bs, d);
            std::vector<int> succ(bs), tri(bs);
            for (int i = 0; i < bs; ++i) {
                const DataPoint& p = train.points[order[start + i]];
                for (int j = 0; j < d; ++j) X(i, j) = p.theta[j];
                succ[i] = p.successes;
                tri[i] = p.trials;
            }
            std::vector<BnnWeights> noises;
            for (int s = 0; s < config.n_mc; ++s) noises.push_back(sample_noise(arch, noise_rng));
            build_bnn_graph(graph, post, X, succ, tri, n, noises);
            graph.tape.backward(graph.elbo);
            const double value = graph.tape.val(graph.elbo)(0, 0);
            if (!std::isfinite(value))
                throw std::runtime_error("train_bnn: non-finite ELBO at epoch " +
                                         std::to_string(epoch));
            BnnWeights gmu, grho;
            for (int l = 0; l < arch.layer_count(); ++l) {
                gmu.w.push_back(graph.tape.grad(graph.mu_w[l]));
                gmu.b.push_back(graph.tape.grad(graph.mu_b[l]));
                grho.w.push_back(graph.tape.grad(graph.rho_w[l]));
                grho.b.push_back(graph.tape.grad(graph.rho_b[l]));
            }
            std::vector<double> grads;
            flatten(gmu, grads);
            flatten(grho, grads);
            opt.step(params, grads);
            unpack_all();
            epoch_elbo += value;
            ++batches;
        }
        post.diagnostics.elbo_trace.push_back(epoch_elbo / batches);
    }
    post.diagnostics.final_elbo =
        post.diagnostics.elbo_trace.empty() ? 0.0 : post.diagnostics.elbo_trace.back();
    post.diagnostics.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return post;
}

Mat predict_bnn_samples(const WeightPosterior& posterior,
                        const std::vector<std::vector<double>>& raw_thetas, int c_samples,
                        std::uint64_t seed) {
    if (c_samples < 2) throw std::invalid_argument("predict_bnn: need at least two samples");
    const int n = static_cast<int>(raw_thetas.size());
    Mat X(n, posterior.arch.input_dim);
    for (int i = 0; i < n; ++i) {
        std::vector<double> s = posterior.scaling.scale(raw_thetas[i]);
        for (int j = 0; j < X.cols(); ++j) X(i, j) = s[j];
    }
    Mat samples(c_samples, n);
    const BnnArchitecture& arch = posterior.arch;
    BnnWeights w = posterior.mu;  // shape template
    for (int c = 0; c < c_samples; ++c) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c), tag_hash("bnn-sample")));
        for (int l = 0; l < arch.layer_count(); ++l) {
            for (size_t i = 0; i < w.w[l].size(); ++i)
                w.w[l].vec()[i] = posterior.mu.w[l].vec()[i] +
                                  std::exp(posterior.rho.w[l].vec()[i]) * rng.normal();
            for (size_t i = 0; i < w.b[l].size(); ++i)
                w.b[l].vec()[i] = posterior.mu.b[l].vec()[i] +
                                  std::exp(posterior.rho.b[l].vec()[i]) * rng.normal();
        }
        Mat f = bnn_forward(arch, w, X);
        for (int i = 0; i < n; ++i) samples(c, i) = f(i, 0);
    }
    return samples;
}

BnnPrediction predict_bnn(const WeightPosterior& posterior,
                          const std::vector<std::vector<double>>& raw_thetas, int c_samples,
                          std::uint64_t seed) {
    Mat samples = predict_bnn_samples(posterior, raw_thetas, c_samples, seed);
    const int c = samples.rows(), n = samples.cols();
    BnnPrediction out;
    out.mean.assign(n, 0.0);
    out.stddev.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < c; ++i) s += samples(i, j);
        const double mean = s / c;
        double q = 0.0;
        for (int i = 0; i < c; ++i) {
            const double dxx = samples(i, j) - mean;
            q += dxx * dxx;
        }
        out.mean[j] = mean;
        out.stddev[j] = std::sqrt(q / (c - 1));
    }
    return out;
}

std::vector<double> column_quantile(const Mat& samples, double p) {
    const int c = samples.rows(), n = samples.cols();
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("column_quantile: p must be in (0,1)");
    int k = static_cast<int>(std::ceil(p * c));
    k = std::min(std::max(k, 1), c);
    std::vector<double> out(n), col(c);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < c; ++i) col[i] = samples(i, j);
        std::nth_element(col.begin(), col.begin() + (k - 1), col.end());
        out[j] = col[k - 1];
    }
    return out;
}

}  // namespace svsmc
