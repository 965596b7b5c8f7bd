#include "svsmc/posterior.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "svsmc/math.hpp"

namespace svsmc {

using nlohmann::json;

PosteriorSummary GpPosteriorModel::summarize(const std::vector<std::vector<double>>& thetas,
                                             const std::vector<double>& probs) const {
    GpPrediction pred = predict_gp(gp_, thetas);
    PosteriorSummary s;
    s.mean = pred.mean;
    s.stddev = pred.stddev;
    for (double p : probs) {
        const double z = normal_quantile(p);
        std::vector<double> q(pred.latent_mean.size());
        for (size_t i = 0; i < q.size(); ++i)
            q[i] = normal_cdf(pred.latent_mean[i] + std::sqrt(pred.latent_var[i]) * z);
        s.quantiles[p] = std::move(q);
    }
    return s;
}

Mat GpPosteriorModel::sample_predictions(const std::vector<std::vector<double>>& thetas,
                                         int c_samples, std::uint64_t seed) const {
    const int n = static_cast<int>(thetas.size());
    Mat X(n, gp_.state.input_dim());
    for (int i = 0; i < n; ++i) {
        std::vector<double> sc = gp_.scaling.scale(thetas[i]);
        for (int j = 0; j < X.cols(); ++j) X(i, j) = sc[j];
    }
    GpMarginals marg = q_g_marginals(gp_.state, X);
    Mat out(c_samples, n);
    for (int c = 0; c < c_samples; ++c) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c), tag_hash("gp-sample")));
        for (int i = 0; i < n; ++i)
            out(c, i) = normal_cdf(marg.mean[i] + std::sqrt(marg.var[i]) * rng.normal());
    }
    return out;
}

double gp_pac_kl(const GpPosterior& posterior, const Mat& scaled_inputs) {
    const int n = scaled_inputs.rows();
    Mat mean, cov;
    q_g_full(posterior.state, scaled_inputs, mean, cov);
    Mat K0 = kernel_matrix(posterior.reference_kernel, scaled_inputs, scaled_inputs,
                           posterior.state.jitter_rel, true);
    Mat L0 = cholesky(K0);
    Mat L1;
    double bump = 0.0;
    for (int attempt = 0;; ++attempt) {
        try {
            Mat c = cov;
            if (bump > 0.0)
                for (int i = 0; i < n; ++i) c(i, i) += bump;
            L1 = cholesky(c);
            break;
        } catch (const FactorizationError&) {
            if (attempt >= 3)
                throw FactorizationError("gp_pac_kl: posterior covariance factorization failed");
            bump = bump == 0.0 ? 1e-10 : bump * 100.0;
        }
    }
    // KL[N(m1, S1) || N(0, S0)]
    Mat W = solve_lower(L0, L1);       // tr(S0^-1 S1) = ||L0^-1 L1||_F^2
    Mat e = solve_lower(L0, mean);     // m1^T S0^-1 m1 = ||L0^-1 m1||^2
    double logdet0 = 0.0, logdet1 = 0.0;
    for (int i = 0; i < n; ++i) {
        logdet0 += std::log(L0(i, i));
        logdet1 += std::log(L1(i, i));
    }
    return 0.5 * (frobenius_sq(W) + frobenius_sq(e) - n) + logdet0 - logdet1;
}

double GpPosteriorModel::pac_kl() const { return gp_pac_kl(gp_, gp_.training_inputs); }

PosteriorSummary BnnPosteriorModel::summarize(const std::vector<std::vector<double>>& thetas,
                                              const std::vector<double>& probs) const {
    Mat samples =
        predict_bnn_samples(bnn_, thetas, bnn_.predict_samples, bnn_.predict_seed);
    const int c = samples.rows(), n = samples.cols();
    PosteriorSummary s;
    s.mean.assign(n, 0.0);
    s.stddev.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int i = 0; i < c; ++i) acc += samples(i, j);
        const double mean = acc / c;
        double q = 0.0;
        for (int i = 0; i < c; ++i) {
            const double dx = samples(i, j) - mean;
            q += dx * dx;
        }
        s.mean[j] = mean;
        s.stddev[j] = std::sqrt(q / (c - 1));
    }
    for (double p : probs) s.quantiles[p] = column_quantile(samples, p);
    return s;
}

Mat BnnPosteriorModel::sample_predictions(const std::vector<std::vector<double>>& thetas,
                                          int c_samples, std::uint64_t seed) const {
    return predict_bnn_samples(bnn_, thetas, c_samples, seed);
}

double BnnPosteriorModel::pac_kl() const { return kl_weights(bnn_); }

namespace {

json mat_to_json(const Mat& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = m.vec();
    return j;
}

Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
    m.vec() = j.at("data").get<std::vector<double>>();
    if (m.vec().size() != static_cast<size_t>(m.rows()) * m.cols())
        throw std::runtime_error("posterior bundle: matrix size mismatch");
    return m;
}

json kernel_to_json(const RbfKernel& k) {
    json j;
    j["log_lengthscale"] = k.log_lengthscale;
    j["log_variance"] = k.log_variance;
    return j;
}

RbfKernel kernel_from_json(const json& j) {
    RbfKernel k;
    k.log_lengthscale = j.at("log_lengthscale").get<std::vector<double>>();
    k.log_variance = j.at("log_variance").get<double>();
    return k;
}

json scaling_to_json(const Scaling& s) {
    json j;
    j["lo"] = s.lo;
    j["hi"] = s.hi;
    return j;
}

Scaling scaling_from_json(const json& j) {
    Scaling s;
    s.lo = j.at("lo").get<std::vector<double>>();
    s.hi = j.at("hi").get<std::vector<double>>();
    return s;
}

json diagnostics_to_json(const TrainDiagnostics& d) {
    json j;
    j["final_elbo"] = d.final_elbo;
    j["wall_clock_seconds"] = d.wall_clock_seconds;
    j["elbo_trace"] = d.elbo_trace;
    return j;
}

TrainDiagnostics diagnostics_from_json(const json& j) {
    TrainDiagnostics d;
    d.final_elbo = j.value("final_elbo", 0.0);
    d.wall_clock_seconds = j.value("wall_clock_seconds", 0.0);
    if (j.contains("elbo_trace")) d.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
    return d;
}

json weights_to_json(const BnnWeights& w) {
    json j;
    j["w"] = json::array();
    j["b"] = json::array();
    for (const Mat& m : w.w) j["w"].push_back(mat_to_json(m));
    for (const Mat& m : w.b) j["b"].push_back(mat_to_json(m));
    return j;
}

BnnWeights weights_from_json(const json& j) {
    BnnWeights w;
    for (const auto& m : j.at("w")) w.w.push_back(mat_from_json(m));
    for (const auto& m : j.at("b")) w.b.push_back(mat_from_json(m));
    return w;
}

}  // namespace

std::string GpPosteriorModel::to_json_text() const {
    json j;
    j["schema"] = "svsmc-posterior";
    j["backend"] = "gp";
    j["jitter_rel"] = gp_.state.jitter_rel;
    j["kernel"] = kernel_to_json(gp_.state.kernel);
    j["reference_kernel"] = kernel_to_json(gp_.reference_kernel);
    j["inducing"] = mat_to_json(gp_.state.inducing);
    j["eta"] = gp_.state.eta.vec();
    j["chol_off"] = gp_.state.chol_off.vec();
    j["chol_log_diag"] = gp_.state.chol_log_diag.vec();
    j["scaling"] = scaling_to_json(gp_.scaling);
    j["training_trials"] = gp_.training_trials;
    j["training_inputs"] = mat_to_json(gp_.training_inputs);
    j["training_successes"] = gp_.training_successes;
    j["diagnostics"] = diagnostics_to_json(gp_.diagnostics);
    return j.dump(2);
}

std::string BnnPosteriorModel::to_json_text() const {
    json j;
    j["schema"] = "svsmc-posterior";
    j["backend"] = "bnn";
    j["arch"] = {{"input_dim", bnn_.arch.input_dim},
                 {"hidden", bnn_.arch.hidden},
                 {"leaky_slope", bnn_.arch.leaky_slope}};
    j["mu"] = weights_to_json(bnn_.mu);
    j["rho"] = weights_to_json(bnn_.rho);
    j["prior"] = {{"center", weights_to_json(bnn_.prior.center)},
                  {"std_per_layer", bnn_.prior.std_per_layer},
                  {"pretrained", bnn_.pretrained_prior}};
    j["scaling"] = scaling_to_json(bnn_.scaling);
    j["training_trials"] = bnn_.training_trials;
    j["training_inputs"] = mat_to_json(bnn_.training_inputs);
    j["training_successes"] = bnn_.training_successes;
    j["predict"] = {{"samples", bnn_.predict_samples}, {"seed", bnn_.predict_seed}};
    j["diagnostics"] = diagnostics_to_json(bnn_.diagnostics);
    return j.dump(2);
}

std::unique_ptr<Posterior> posterior_from_json_text(const std::string& text) {
    json j = json::parse(text);
    const std::string backend = j.at("backend").get<std::string>();
    if (backend == "gp") {
        GpPosterior p;
        p.state.jitter_rel = j.at("jitter_rel").get<double>();
        p.state.kernel = kernel_from_json(j.at("kernel"));
        p.reference_kernel = kernel_from_json(j.at("reference_kernel"));
        p.state.inducing = mat_from_json(j.at("inducing"));
        p.state.eta = Mat(p.state.inducing.rows(), 1);
        p.state.eta.vec() = j.at("eta").get<std::vector<double>>();
        const int m = p.state.inducing.rows();
        p.state.chol_off = Mat(m * (m - 1) / 2, 1);
        p.state.chol_off.vec() = j.at("chol_off").get<std::vector<double>>();
        p.state.chol_log_diag = Mat(m, 1);
        p.state.chol_log_diag.vec() = j.at("chol_log_diag").get<std::vector<double>>();
        p.scaling = scaling_from_json(j.at("scaling"));
        p.training_trials = j.at("training_trials").get<int>();
        p.training_inputs = mat_from_json(j.at("training_inputs"));
        p.training_successes = j.at("training_successes").get<std::vector<int>>();
        p.diagnostics = diagnostics_from_json(j.at("diagnostics"));
        return std::make_unique<GpPosteriorModel>(std::move(p));
    }
    if (backend == "bnn") {
        WeightPosterior p;
        p.arch.input_dim = j.at("arch").at("input_dim").get<int>();
        p.arch.hidden = j.at("arch").at("hidden").get<std::vector<int>>();
        p.arch.leaky_slope = j.at("arch").at("leaky_slope").get<double>();
        p.mu = weights_from_json(j.at("mu"));
        p.rho = weights_from_json(j.at("rho"));
        p.prior.center = weights_from_json(j.at("prior").at("center"));
        p.prior.std_per_layer = j.at("prior").at("std_per_layer").get<std::vector<double>>();
        p.pretrained_prior = j.at("prior").value("pretrained", false);
        p.scaling = scaling_from_json(j.at("scaling"));
        p.training_trials = j.at("training_trials").get<int>();
        p.training_inputs = mat_from_json(j.at("training_inputs"));
        p.training_successes = j.at("training_successes").get<std::vector<int>>();
        p.predict_samples = j.at("predict").at("samples").get<int>();
        p.predict_seed = j.at("predict").at("seed").get<std::uint64_t>();
        p.diagnostics = diagnostics_from_json(j.at("diagnostics"));
        return std::make_unique<BnnPosteriorModel>(std::move(p));
    }
    throw std::runtime_error("unknown posterior backend: " + backend);
}

std::unique_ptr<Posterior> load_posterior(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open posterior bundle " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return posterior_from_json_text(ss.str());
}

void save_posterior(const Posterior& posterior, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write posterior bundle " + path);
    out << posterior.to_json_text() << "\n";
}

}  // namespace svsmc
