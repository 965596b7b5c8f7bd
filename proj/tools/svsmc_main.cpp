#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svsmc/commands.hpp"

namespace {

std::vector<double> parse_params(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
}

svsmc::RunConfig load_config_with_overrides(const std::string& config_path,
                                            const std::string& backend, std::uint64_t seed,
                                            bool seed_set, const std::string& formula,
                                            const std::string& formula_file,
                                            const std::string& out, int threads) {
    svsmc::RunConfig cfg = svsmc::load_run_config(config_path);
    if (!backend.empty()) cfg.backend = backend;
    if (seed_set) cfg.seed = seed;
    if (!formula.empty()) cfg.formula = formula;
    if (!formula_file.empty()) cfg.formula = read_text_file(formula_file);
    if (!out.empty()) cfg.out_dir = out;
    if (threads > 0) cfg.threads = threads;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Satisfaction-probability learning for parametric CTMCs with statistical guarantees"};
    app.require_subcommand(1);

    std::string config_path, backend, formula, formula_file, out, model_path, posterior_path,
        dataset_path;
    std::string params_csv;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    double horizon = 0.0, epsilon = 0.05, epsilon2 = 0.05, z = 1.96;
    std::string normalizer = "posterior-std";
    int runs = 100, r_dim = 2, count = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration JSON")->required();
        cmd->add_option("--backend", backend, "gp or bnn");
        cmd->add_option("--seed", seed, "global seed")->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--formula", formula, "STL formula text");
        cmd->add_option("--formula-file", formula_file, "file containing the STL formula");
        cmd->add_option("--out", out, "output directory");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
    };

    CLI::App* generate = app.add_subcommand("generate", "sample parameters, simulate, monitor, write datasets");
    add_common(generate);

    CLI::App* train = app.add_subcommand("train", "train the configured backend on a dataset");
    add_common(train);
    train->add_option("--dataset", dataset_path, "training CSV (defaults to <out>/train.csv)");

    CLI::App* calibrate = app.add_subcommand("calibrate", "conformal + Chernoff + PAC-Bayes bounds");
    calibrate->add_option("--posterior", posterior_path, "posterior bundle")->required();
    calibrate->add_option("--calibration", dataset_path, "calibration CSV")->required();
    calibrate->add_option("--epsilon", epsilon, "significance level");
    calibrate->add_option("--epsilon2", epsilon2, "Chernoff significance level");
    calibrate->add_option("--normalizer", normalizer, "id | posterior-std | posterior-iqr");
    calibrate->add_option("--out", out, "output directory")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "RMSE / accuracy / uncertainty on a test set");
    evaluate->add_option("--posterior", posterior_path, "posterior bundle")->required();
    evaluate->add_option("--test", dataset_path, "test CSV")->required();
    evaluate->add_option("--epsilon", epsilon, "credible-interval significance");
    evaluate->add_option("--z", z, "SMC confidence z value");
    evaluate->add_option("--out", out, "output directory")->required();

    CLI::App* simulate = app.add_subcommand("simulate", "one SSA trajectory as CSV");
    simulate->add_option("--model", model_path, "model JSON")->required();
    simulate->add_option("--params", params_csv, "comma-separated rate parameters")->required();
    simulate->add_option("--horizon", horizon, "time horizon")->required();
    simulate->add_option("--seed", seed, "seed");
    simulate->add_option("--out", out, "output CSV path ('-' for stdout)");

    CLI::App* monitor = app.add_subcommand("monitor", "SMC estimate at one parameter point");
    monitor->add_option("--model", model_path, "model JSON")->required();
    monitor->add_option("--formula", formula, "STL formula");
    monitor->add_option("--formula-file", formula_file, "file containing the STL formula");
    monitor->add_option("--params", params_csv, "comma-separated rate parameters")->required();
    monitor->add_option("--horizon", horizon, "time horizon")->required();
    monitor->add_option("--runs", runs, "number of simulations");
    monitor->add_option("--seed", seed, "seed");
    monitor->add_option("--z", z, "confidence z value");

    CLI::App* random_model = app.add_subcommand("random-model", "generate random pCTMC models");
    random_model->add_option("--r", r_dim, "number of reactions / parameter dimension")->required();
    random_model->add_option("--count", count, "models to generate");
    random_model->add_option("--seed", seed, "seed");
    random_model->add_option("--out", out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            svsmc::RunConfig cfg =
                load_config_with_overrides(config_path, backend, seed, seed_set, formula,
                                           formula_file, out, threads);
            auto paths = svsmc::cmd_generate(cfg);
            std::cout << "wrote " << paths.train << ", " << paths.calibration << ", " << paths.test
                      << "\n";
        } else if (train->parsed()) {
            svsmc::RunConfig cfg =
                load_config_with_overrides(config_path, backend, seed, seed_set, formula,
                                           formula_file, out, threads);
            std::string csv = dataset_path.empty() ? cfg.out_dir + "/train.csv" : dataset_path;
            auto paths = svsmc::cmd_train(cfg, csv);
            std::cout << "wrote " << paths.posterior << "\n";
        } else if (calibrate->parsed()) {
            auto paths = svsmc::cmd_calibrate(posterior_path, dataset_path, epsilon, epsilon2,
                                              svsmc::normalizer_from_string(normalizer), out);
            std::cout << "wrote " << paths.report << "\n";
        } else if (evaluate->parsed()) {
            auto paths = svsmc::cmd_evaluate(posterior_path, dataset_path, epsilon, z, out);
            std::cout << "wrote " << paths.report << "\n";
        } else if (simulate->parsed()) {
            svsmc::cmd_simulate(model_path, parse_params(params_csv), horizon, seed,
                                out.empty() ? "-" : out);
        } else if (monitor->parsed()) {
            if (formula.empty() && !formula_file.empty()) formula = read_text_file(formula_file);
            if (formula.empty()) throw std::runtime_error("monitor needs --formula or --formula-file");
            std::cout << svsmc::cmd_monitor(model_path, formula, parse_params(params_csv), horizon,
                                            runs, seed, z)
                      << "\n";
        } else if (random_model->parsed()) {
            auto paths = svsmc::cmd_random_model(r_dim, count, seed, out);
            for (const auto& p : paths) std::cout << "wrote " << p << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
