#include "svsmc/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "svsmc/metrics.hpp"
#include "svsmc/posterior.hpp"

namespace svsmc {

namespace fs = std::filesystem;
using nlohmann::json;

RunConfig run_config_from_json_text(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    if (j.contains("model")) {
        if (j["model"].is_string()) {
            c.model_path = j["model"].get<std::string>();
        } else {
            RandomModelSpec spec;
            spec.r = j["model"].at("random").at("r").get<int>();
            spec.count = j["model"].at("random").value("count", 1);
            c.random_model = spec;
        }
    }
    c.formula = j.value("formula", "");
    c.horizon = j.value("horizon", 0.0);
    if (j.contains("sizes")) {
        const json& s = j["sizes"];
        c.sizes.n_train = s.value("n_train", c.sizes.n_train);
        c.sizes.m_train = s.value("m_train", c.sizes.m_train);
        c.sizes.n_cal = s.value("n_cal", c.sizes.n_cal);
        c.sizes.n_test = s.value("n_test", c.sizes.n_test);
        c.sizes.m_test = s.value("m_test", c.sizes.m_test);
    }
    c.sampling = sampling_strategy_from_string(j.value("sampling", "uniform-random"));
    c.backend = j.value("backend", "gp");
    if (j.contains("gp")) {
        const json& g = j["gp"];
        c.gp.max_inducing = g.value("max_inducing", c.gp.max_inducing);
        c.gp.epochs = g.value("epochs", c.gp.epochs);
        c.gp.batch_size = g.value("batch_size", c.gp.batch_size);
        c.gp.learning_rate = g.value("learning_rate", c.gp.learning_rate);
        c.gp.n_nodes = g.value("n_nodes", c.gp.n_nodes);
        c.gp.jitter_rel = g.value("jitter_rel", c.gp.jitter_rel);
    }
    if (j.contains("bnn")) {
        const json& b = j["bnn"];
        if (b.contains("hidden")) c.bnn.hidden = b["hidden"].get<std::vector<int>>();
        c.bnn.leaky_slope = b.value("leaky_slope", c.bnn.leaky_slope);
        c.bnn.epochs = b.value("epochs", c.bnn.epochs);
        c.bnn.batch_size = b.value("batch_size", c.bnn.batch_size);
        c.bnn.learning_rate = b.value("learning_rate", c.bnn.learning_rate);
        c.bnn.n_mc = b.value("n_mc", c.bnn.n_mc);
        c.bnn.pretrain = b.value("pretrain", c.bnn.pretrain);
        c.bnn.pretrain_epochs = b.value("pretrain_epochs", c.bnn.pretrain_epochs);
        c.bnn.predict_samples = b.value("predict_samples", c.bnn.predict_samples);
    }
    if (j.contains("guarantees")) {
        const json& g = j["guarantees"];
        c.epsilon = g.value("epsilon", c.epsilon);
        c.epsilon2 = g.value("epsilon2", c.epsilon2);
        c.normalizer = normalizer_from_string(g.value("normalizer", "posterior-std"));
    }
    c.z = j.value("z", c.z);
    c.seed = j.value("seed", 0ULL);
    c.threads = j.value("threads", 0);
    c.out_dir = j.value("out", c.out_dir);
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return run_config_from_json_text(ss.str());
}

void validate_run_config(const RunConfig& c) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (c.model_path.empty() && !c.random_model) fail("a model path or a random spec is required");
    if (c.formula.empty()) fail("a formula is required");
    if (!(c.horizon > 0.0)) fail("horizon must be positive");
    if (c.sizes.n_train < 1 || c.sizes.m_train < 1 || c.sizes.n_cal < 1 || c.sizes.n_test < 1 ||
        c.sizes.m_test < 1)
        fail("all dataset sizes must be >= 1");
    if (c.backend != "gp" && c.backend != "bnn") fail("backend must be gp or bnn");
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) fail("epsilon must be in (0,1)");
    if (!(c.epsilon2 > 0.0 && c.epsilon2 < 1.0)) fail("epsilon2 must be in (0,1)");
    if (!(c.z > 0.0)) fail("z must be positive");
    if (c.gp.epochs < 1 || c.gp.batch_size < 1 || c.gp.max_inducing < 1 || c.gp.n_nodes < 1)
        fail("gp hyperparameters out of range");
    if (!(c.gp.learning_rate >= 0.0)) fail("gp learning rate must be nonnegative");
    if (c.bnn.epochs < 1 || c.bnn.batch_size < 1 || c.bnn.n_mc < 1) fail("bnn hyperparameters out of range");
    if (!(c.bnn.learning_rate >= 0.0)) fail("bnn learning rate must be nonnegative");
    for (int h : c.bnn.hidden)
        if (h < 1) fail("bnn hidden widths must be >= 1");
    // The formula must parse and fit inside the simulation horizon.
    FormulaPtr f = parse_stl(c.formula);
    if (temporal_depth(*f) > c.horizon) fail("formula temporal depth exceeds the horizon");
}

namespace {

std::string hex_hash(const std::string& text) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(tag_hash(text)));
    return buf;
}

std::string hash_of_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::stringstream ss;
    ss << in.rdbuf();
    return hex_hash(ss.str());
}

// Canonical form of the resolved configuration, hashed into the manifest.
std::string config_canonical_json(const RunConfig& c) {
    json j;
    j["model"] = c.model_path;
    if (c.random_model) j["random"] = {{"r", c.random_model->r}, {"count", c.random_model->count}};
    j["formula"] = c.formula;
    j["horizon"] = c.horizon;
    j["sizes"] = {{"n_train", c.sizes.n_train}, {"m_train", c.sizes.m_train},
                  {"n_cal", c.sizes.n_cal},     {"n_test", c.sizes.n_test},
                  {"m_test", c.sizes.m_test}};
    j["sampling"] = sampling_strategy_to_string(c.sampling);
    j["backend"] = c.backend;
    j["gp"] = {{"max_inducing", c.gp.max_inducing}, {"epochs", c.gp.epochs},
               {"batch_size", c.gp.batch_size},     {"learning_rate", c.gp.learning_rate},
               {"n_nodes", c.gp.n_nodes},           {"jitter_rel", c.gp.jitter_rel}};
    j["bnn"] = {{"hidden", c.bnn.hidden},
                {"leaky_slope", c.bnn.leaky_slope},
                {"epochs", c.bnn.epochs},
                {"batch_size", c.bnn.batch_size},
                {"learning_rate", c.bnn.learning_rate},
                {"n_mc", c.bnn.n_mc},
                {"pretrain", c.bnn.pretrain},
                {"pretrain_epochs", c.bnn.pretrain_epochs},
                {"predict_samples", c.bnn.predict_samples}};
    j["guarantees"] = {{"epsilon", c.epsilon},
                       {"epsilon2", c.epsilon2},
                       {"normalizer", normalizer_to_string(c.normalizer)}};
    j["z"] = c.z;
    j["seed"] = c.seed;
    return j.dump();
}

void write_manifest(const RunConfig& config, const fs::path& dir,
                    const std::vector<std::pair<std::string, std::string>>& inputs) {
    json j;
    j["tool"] = "svsmc";
    j["version"] = "0.1.0";
    j["seed"] = config.seed;
    j["backend"] = config.backend;
    j["config_hash"] = hex_hash(config_canonical_json(config));
    j["inputs"] = json::object();
    for (const auto& [name, hash] : inputs) j["inputs"][name] = hash;
    std::ofstream out(dir / "manifest.json");
    out << j.dump(2) << "\n";
}

Dataset load_scaled_train(const std::string& csv, DatasetMeta& meta) {
    Dataset raw = load_dataset(csv, &meta);
    if (meta.param_space.empty())
        throw std::runtime_error("train dataset sidecar lacks param_space; cannot scale inputs");
    raw.role = DatasetRole::Train;
    return scale_inputs(raw, meta.param_space);
}

}  // namespace

GeneratedPaths cmd_generate(const RunConfig& config) {
    validate_run_config(config);
    PctmcModel model;
    if (config.random_model) {
        Rng rng(config.seed, tag_hash("random-model"));
        model = random_pctmc(config.random_model->r, rng);
    } else {
        model = load_model(config.model_path);
    }
    auto violations = validate_model(model);
    if (!violations.empty()) {
        std::string msg = "model validation failed:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw std::runtime_error(msg);
    }
    FormulaPtr formula = parse_stl(config.formula);

    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    GeneratedPaths out;
    out.model = (dir / "model.json").string();
    save_model(model, out.model);

    DatasetMeta meta;
    meta.model_hash = model_content_hash(model);
    meta.formula = config.formula;
    meta.param_space = model.param_space;

    struct Piece {
        const char* name;
        DatasetRole role;
        int n, m;
        SamplingStrategy strategy;
    };
    const Piece pieces[] = {
        {"train", DatasetRole::Train, config.sizes.n_train, config.sizes.m_train, config.sampling},
        {"calibration", DatasetRole::Calibration, config.sizes.n_cal, config.sizes.m_train,
         SamplingStrategy::UniformRandom},
        {"test", DatasetRole::Test, config.sizes.n_test, config.sizes.m_test,
         SamplingStrategy::UniformRandom},
    };
    std::string* slots[] = {&out.train, &out.calibration, &out.test};
    for (int k = 0; k < 3; ++k) {
        const Piece& piece = pieces[k];
        const std::uint64_t theta_seed = derive_seed(config.seed, tag_hash(piece.name), 1);
        const std::uint64_t sim_seed = derive_seed(config.seed, tag_hash(piece.name), 2);
        Rng theta_rng(theta_seed);
        auto thetas = sample_parameters(model.param_space, piece.n, piece.strategy, theta_rng);
        Dataset ds = generate_dataset(model, formula, thetas, piece.m, config.horizon, piece.role,
                                      sim_seed, config.threads);
        meta.role = role_to_string(piece.role);
        meta.seed = sim_seed;
        *slots[k] = (dir / (std::string(piece.name) + ".csv")).string();
        save_dataset(ds, meta, *slots[k]);
    }
    write_manifest(config, dir, {{"model", meta.model_hash}});
    out.manifest = (dir / "manifest.json").string();
    return out;
}

TrainedPaths cmd_train(const RunConfig& config, const std::string& train_csv) {
    validate_run_config(config);
    DatasetMeta meta;
    Dataset train = load_scaled_train(train_csv, meta);

    std::unique_ptr<Posterior> posterior;
    if (config.backend == "gp") {
        GpConfig gc = config.gp;
        gc.seed = derive_seed(config.seed, tag_hash("train-gp"));
        posterior = std::make_unique<GpPosteriorModel>(train_gp(train, gc));
    } else if (config.backend == "bnn") {
        BnnConfig bc = config.bnn;
        bc.seed = derive_seed(config.seed, tag_hash("train-bnn"));
        posterior = std::make_unique<BnnPosteriorModel>(train_bnn(train, bc));
    } else {
        throw std::invalid_argument("config: backend must be gp or bnn");
    }

    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    TrainedPaths out;
    out.posterior = (dir / ("posterior_" + config.backend + ".json")).string();
    save_posterior(*posterior, out.posterior);

    json diag;
    diag["backend"] = config.backend;
    diag["train_csv"] = train_csv;
    diag["train_hash"] = hash_of_file(train_csv);
    diag["model_hash"] = meta.model_hash;
    if (config.backend == "gp") {
        const auto& gp = static_cast<const GpPosteriorModel&>(*posterior).gp();
        diag["final_elbo"] = gp.diagnostics.final_elbo;
        diag["wall_clock_seconds"] = gp.diagnostics.wall_clock_seconds;
        diag["elbo_trace"] = gp.diagnostics.elbo_trace;
    } else {
        const auto& bnn = static_cast<const BnnPosteriorModel&>(*posterior).bnn();
        diag["final_elbo"] = bnn.diagnostics.final_elbo;
        diag["wall_clock_seconds"] = bnn.diagnostics.wall_clock_seconds;
        diag["elbo_trace"] = bnn.diagnostics.elbo_trace;
        diag["pretrained_prior"] = bnn.pretrained_prior;
    }
    out.diagnostics = (dir / ("diagnostics_" + config.backend + ".json")).string();
    std::ofstream dout(out.diagnostics);
    dout << diag.dump(2) << "\n";
    return out;
}

CalibrationPaths cmd_calibrate(const std::string& posterior_path,
                               const std::string& calibration_csv, double epsilon,
                               double epsilon2, ScoreNormalizer normalizer,
                               const std::string& out_dir) {
    std::unique_ptr<Posterior> posterior = load_posterior(posterior_path);
    DatasetMeta meta;
    Dataset cal = load_dataset(calibration_csv, &meta);
    cal.role = DatasetRole::Calibration;
    if (cal.trials() != posterior->training_trials())
        throw std::invalid_argument("calibrate: calibration trials (" +
                                    std::to_string(cal.trials()) + ") must equal training trials (" +
                                    std::to_string(posterior->training_trials()) + ")");

    GuaranteeBound icp = icp_bound(*posterior, cal, epsilon);
    GuaranteeBound nicp = nicp_bound(*posterior, cal, epsilon, normalizer);
    const int m = cal.trials();
    GuaranteeBound icp_ch = combined_bound(icp, m, epsilon2);
    GuaranteeBound nicp_ch = combined_bound(nicp, m, epsilon2);

    // PAC-Bayes over the training set stored in the bundle.
    const double kl = kl_for_pac(*posterior);
    Dataset train_for_pac;
    train_for_pac.role = DatasetRole::Train;
    if (auto* gp = dynamic_cast<const GpPosteriorModel*>(posterior.get())) {
        const auto& g = gp->gp();
        for (int i = 0; i < g.training_inputs.rows(); ++i) {
            DataPoint p;
            std::vector<double> scaled(g.training_inputs.cols());
            for (int j = 0; j < g.training_inputs.cols(); ++j) scaled[j] = g.training_inputs(i, j);
            p.theta = g.scaling.unscale(scaled);
            p.successes = g.training_successes[i];
            p.trials = g.training_trials;
            train_for_pac.points.push_back(std::move(p));
        }
    } else if (auto* bn = dynamic_cast<const BnnPosteriorModel*>(posterior.get())) {
        const auto& b = bn->bnn();
        for (int i = 0; i < b.training_inputs.rows(); ++i) {
            DataPoint p;
            std::vector<double> scaled(b.training_inputs.cols());
            for (int j = 0; j < b.training_inputs.cols(); ++j) scaled[j] = b.training_inputs(i, j);
            p.theta = b.scaling.unscale(scaled);
            p.successes = b.training_successes[i];
            p.trials = b.training_trials;
            train_for_pac.points.push_back(std::move(p));
        }
    }
    ExpectedError emp =
        expected_errors(*posterior, train_for_pac, 200, derive_seed(0x5ac, tag_hash("pac-emp")));
    const double pac =
        pac_bayes_bound(emp.mean, kl, train_for_pac.size(), epsilon, 1.0);

    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    json j;
    j["schema"] = "svsmc-bounds";
    j["epsilon"] = epsilon;
    j["epsilon2"] = epsilon2;
    auto bound_json = [](const GuaranteeBound& b) {
        json o;
        o["kind"] = bound_kind_to_string(b.kind);
        o["epsilon_total"] = b.epsilon_total;
        o["tau"] = b.tau;
        o["normalizer"] = normalizer_to_string(b.normalizer);
        o["target"] = b.target == BoundTarget::SmcEstimate ? "smc-estimate" : "exact-satisfaction-function";
        o["vacuous"] = b.vacuous;
        o["chernoff"] = b.chernoff;
        return o;
    };
    j["icp"] = bound_json(icp);
    j["nicp"] = bound_json(nicp);
    j["icp_chernoff"] = bound_json(icp_ch);
    j["nicp_chernoff"] = bound_json(nicp_ch);
    j["pac_bayes"] = {{"kl", kl},
                      {"empirical_error", emp.mean},
                      {"empirical_error_stderr", emp.std_error},
                      {"n", train_for_pac.size()},
                      {"epsilon", epsilon},
                      {"bound", pac}};

    CalibrationPaths out;
    out.report = (dir / "bounds.json").string();
    std::ofstream rout(out.report);
    rout << j.dump(2) << "\n";

    // Per-point tables over the calibration inputs.
    std::vector<std::vector<double>> thetas;
    for (const auto& p : cal.points) thetas.push_back(p.theta);
    std::vector<double> probs;
    if (normalizer == ScoreNormalizer::PosteriorIqr) probs = {0.25, 0.75};
    PosteriorSummary s = posterior->summarize(thetas, probs);
    std::vector<double> u = normalizer_values(s, normalizer);
    const GuaranteeBound* all[] = {&icp, &nicp, &icp_ch, &nicp_ch};
    char buf[40];
    for (const GuaranteeBound* b : all) {
        std::string name = bound_kind_to_string(b->kind);
        for (char& ch : name)
            if (ch == '+') ch = '_';
        fs::path table = dir / ("bounds_" + name + ".csv");
        std::ofstream tout(table);
        const int d = cal.dim();
        for (int k = 0; k < d; ++k) tout << "theta_" << k << ",";
        tout << "mean,std,lower,upper\n";
        auto put = [&](double v, char sep) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            tout << buf << sep;
        };
        for (size_t i = 0; i < thetas.size(); ++i) {
            for (int k = 0; k < d; ++k) put(thetas[i][k], ',');
            const double w = b->half_width(u[i]);
            put(s.mean[i], ',');
            put(s.stddev[i], ',');
            put(std::max(0.0, s.mean[i] - w), ',');
            put(std::min(1.0, s.mean[i] + w), '\n');
        }
        out.tables.push_back(table.string());
    }
    return out;
}

EvaluationPaths cmd_evaluate(const std::string& posterior_path, const std::string& test_csv,
                             double epsilon, double z, const std::string& out_dir) {
    std::unique_ptr<Posterior> posterior = load_posterior(posterior_path);
    Dataset test = load_dataset(test_csv);
    test.role = DatasetRole::Test;
    if (test.size() < 1) throw std::runtime_error("evaluate: empty test dataset");
    EvaluationReport rep = evaluate(*posterior, test, epsilon, z);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    EvaluationPaths out;
    out.report = (dir / "report.json").string();
    out.per_point = (dir / "per_point.csv").string();
    write_report(rep, out.report, out.per_point);
    return out;
}

void cmd_simulate(const std::string& model_path, const std::vector<double>& params,
                  double horizon, std::uint64_t seed, const std::string& out_path) {
    PctmcModel model = load_model(model_path);
    Rng rng(seed);
    Trajectory traj = ssa_simulate(model, params, horizon, rng);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (out_path != "-") {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write " + out_path);
        os = &file;
    }
    *os << "time";
    for (const auto& s : model.species) *os << "," << s;
    *os << "\n";
    char buf[40];
    for (int k = 0; k < traj.steps(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", traj.times[k]);
        *os << buf;
        for (int j = 0; j < traj.n_species; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", traj.state(k)[j]);
            *os << "," << buf;
        }
        *os << "\n";
    }
}

std::string cmd_monitor(const std::string& model_path, const std::string& formula,
                        const std::vector<double>& params, double horizon, int runs,
                        std::uint64_t seed, double z) {
    PctmcModel model = load_model(model_path);
    FormulaPtr f = parse_stl(formula);
    int successes = 0;
    for (int j = 0; j < runs; ++j) {
        Rng rng(derive_seed(seed, 0, static_cast<std::uint64_t>(j)));
        Trajectory traj = ssa_simulate(model, params, horizon, rng);
        if (monitor(*f, traj, model.species)) ++successes;
    }
    SmcEstimate est = smc_estimate(successes, runs, z);
    json j;
    j["successes"] = successes;
    j["trials"] = runs;
    j["mean"] = est.mean;
    j["std"] = est.std;
    j["ci_halfwidth"] = est.ci_halfwidth;
    return j.dump(2);
}

std::vector<std::string> cmd_random_model(int r, int count, std::uint64_t seed,
                                          const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> paths;
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i), tag_hash("random-model")));
        PctmcModel model = random_pctmc(r, rng);
        fs::path p = fs::path(out_dir) / ("model_" + std::to_string(i) + ".json");
        save_model(model, p.string());
        paths.push_back(p.string());
    }
    return paths;
}

}  // namespace svsmc
