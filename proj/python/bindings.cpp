#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "svsmc/bnn.hpp"
#include "svsmc/commands.hpp"
#include "svsmc/dataset.hpp"
#include "svsmc/gp.hpp"
#include "svsmc/guarantees.hpp"
#include "svsmc/metrics.hpp"
#include "svsmc/pctmc.hpp"
#include "svsmc/posterior.hpp"
#include "svsmc/stl.hpp"

namespace py = pybind11;
using namespace svsmc;

namespace {

py::array_t<double> mat_to_array(const Mat& m) {
    py::array_t<double> a({m.rows(), m.cols()});
    std::copy(m.vec().begin(), m.vec().end(), a.mutable_data());
    return a;
}

Dataset dataset_from_parts(const std::vector<std::vector<double>>& thetas,
                           const std::vector<int>& successes, const std::vector<int>& trials,
                           const std::string& role) {
    Dataset d;
    d.role = role_from_string(role);
    for (size_t i = 0; i < thetas.size(); ++i) {
        DataPoint p;
        p.theta = thetas[i];
        p.successes = successes[i];
        p.trials = trials[i];
        d.points.push_back(std::move(p));
    }
    d.check_invariants();
    return d;
}

}  // namespace

PYBIND11_MODULE(_svsmc, m) {
    m.doc() = "Satisfaction-probability learning for parametric CTMCs with conformal, "
              "Chernoff and PAC-Bayes guarantees";

    py::class_<ParamInterval>(m, "ParamInterval")
        .def(py::init<double, double>())
        .def_readwrite("lo", &ParamInterval::lo)
        .def_readwrite("hi", &ParamInterval::hi);

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("times",
                               [](const Trajectory& t) { return t.times; })
        .def_property_readonly("states",
                               [](const Trajectory& t) {
                                   Mat s(t.steps(), t.n_species);
                                   std::copy(t.states.begin(), t.states.end(), s.vec().begin());
                                   return mat_to_array(s);
                               })
        .def_readonly("horizon", &Trajectory::horizon);

    py::class_<PctmcModel>(m, "PctmcModel")
        .def_property_readonly("species", [](const PctmcModel& mdl) { return mdl.species; })
        .def_property_readonly("param_dim", &PctmcModel::param_dim)
        .def("to_json", &model_to_json_text)
        .def("content_hash", &model_content_hash);

    m.def("load_model", &load_model, py::arg("path"));
    m.def("model_from_json", &model_from_json_text, py::arg("text"));
    m.def("validate_model", &validate_model, py::arg("model"));
    m.def(
        "propensity",
        [](const PctmcModel& model, const std::vector<long long>& state,
           const std::vector<double>& params, int reaction) {
            return propensity(model, state, params, reaction);
        },
        py::arg("model"), py::arg("state"), py::arg("params"), py::arg("reaction"));
    m.def(
        "simulate",
        [](const PctmcModel& model, const std::vector<double>& params, double horizon,
           std::uint64_t seed) {
            Rng rng(seed);
            return ssa_simulate(model, params, horizon, rng);
        },
        py::arg("model"), py::arg("params"), py::arg("horizon"), py::arg("seed") = 0);
    m.def(
        "random_pctmc",
        [](int r, std::uint64_t seed) {
            Rng rng(seed);
            return random_pctmc(r, rng);
        },
        py::arg("r"), py::arg("seed") = 0);

    m.def(
        "monitor",
        [](const PctmcModel& model, const std::string& formula,
           const std::vector<double>& params, double horizon, std::uint64_t seed) {
            Rng rng(seed);
            Trajectory t = ssa_simulate(model, params, horizon, rng);
            FormulaPtr f = parse_stl(formula);
            return monitor(*f, t, model.species);
        },
        py::arg("model"), py::arg("formula"), py::arg("params"), py::arg("horizon"),
        py::arg("seed") = 0,
        "Simulate one trajectory and monitor the formula at time 0");
    m.def("parse_stl", [](const std::string& text) { return pretty_print(*parse_stl(text)); },
          "Parse an STL formula and return its canonical (desugared) form");

    m.def(
        "sample_parameters",
        [](const std::vector<ParamInterval>& space, int n, const std::string& strategy,
           std::uint64_t seed) {
            Rng rng(seed);
            return sample_parameters(space, n, sampling_strategy_from_string(strategy), rng);
        },
        py::arg("space"), py::arg("n"), py::arg("strategy") = "uniform-random",
        py::arg("seed") = 0);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("thetas",
                               [](const Dataset& d) {
                                   std::vector<std::vector<double>> t;
                                   for (const auto& p : d.points) t.push_back(p.theta);
                                   return t;
                               })
        .def_property_readonly("successes",
                               [](const Dataset& d) {
                                   std::vector<int> s;
                                   for (const auto& p : d.points) s.push_back(p.successes);
                                   return s;
                               })
        .def_property_readonly("trials", [](const Dataset& d) { return d.trials(); })
        .def_property_readonly("size", &Dataset::size);

    m.def("dataset_from_parts", &dataset_from_parts, py::arg("thetas"), py::arg("successes"),
          py::arg("trials"), py::arg("role") = "train");
    m.def(
        "generate_dataset",
        [](const PctmcModel& model, const std::string& formula,
           const std::vector<std::vector<double>>& thetas, int m_trials, double horizon,
           const std::string& role, std::uint64_t seed, int threads) {
            return generate_dataset(model, parse_stl(formula), thetas, m_trials, horizon,
                                    role_from_string(role), seed, threads);
        },
        py::arg("model"), py::arg("formula"), py::arg("thetas"), py::arg("m_trials"),
        py::arg("horizon"), py::arg("role") = "train", py::arg("seed") = 0,
        py::arg("threads") = 0);
    m.def(
        "scale_inputs",
        [](const Dataset& d, const std::vector<ParamInterval>& space) {
            return scale_inputs(d, space);
        },
        py::arg("dataset"), py::arg("space"));
    m.def(
        "smc_estimate",
        [](int successes, int trials, double z) {
            SmcEstimate e = smc_estimate(successes, trials, z);
            return py::make_tuple(e.mean, e.std, e.ci_halfwidth);
        },
        py::arg("successes"), py::arg("trials"), py::arg("z") = 1.96,
        "Returns (mean, std, ci_halfwidth)");
    m.def("load_dataset", [](const std::string& path) { return load_dataset(path, nullptr); },
          py::arg("path"));

    py::class_<Posterior>(m, "Posterior")
        .def_property_readonly("backend", &Posterior::backend)
        .def_property_readonly("training_trials", &Posterior::training_trials)
        .def(
            "predict",
            [](const Posterior& p, const std::vector<std::vector<double>>& thetas,
               const std::vector<double>& probs) {
                PosteriorSummary s = p.summarize(thetas, probs);
                py::dict out;
                out["mean"] = s.mean;
                out["std"] = s.stddev;
                py::dict q;
                for (const auto& [prob, vals] : s.quantiles) q[py::float_(prob)] = vals;
                out["quantiles"] = q;
                return out;
            },
            py::arg("thetas"), py::arg("probs") = std::vector<double>{0.025, 0.975})
        .def(
            "sample",
            [](const Posterior& p, const std::vector<std::vector<double>>& thetas, int c,
               std::uint64_t seed) { return mat_to_array(p.sample_predictions(thetas, c, seed)); },
            py::arg("thetas"), py::arg("c") = 1000, py::arg("seed") = 0)
        .def_property_readonly("pac_kl", &Posterior::pac_kl)
        .def("save", [](const Posterior& p, const std::string& path) { save_posterior(p, path); });

    m.def(
        "train_gp",
        [](const Dataset& scaled_train, int max_inducing, int epochs, int batch_size,
           double learning_rate, int n_nodes, std::uint64_t seed) -> std::unique_ptr<Posterior> {
            GpConfig cfg;
            cfg.max_inducing = max_inducing;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.learning_rate = learning_rate;
            cfg.n_nodes = n_nodes;
            cfg.seed = seed;
            return std::make_unique<GpPosteriorModel>(train_gp(scaled_train, cfg));
        },
        py::arg("train"), py::arg("max_inducing") = 1000, py::arg("epochs") = 2000,
        py::arg("batch_size") = 100, py::arg("learning_rate") = 0.001, py::arg("n_nodes") = 20,
        py::arg("seed") = 0);
    m.def(
        "train_bnn",
        [](const Dataset& scaled_train, const std::vector<int>& hidden, int epochs,
           int batch_size, double learning_rate, int n_mc, bool pretrain, int pretrain_epochs,
           int predict_samples, std::uint64_t seed) -> std::unique_ptr<Posterior> {
            BnnConfig cfg;
            cfg.hidden = hidden;
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.learning_rate = learning_rate;
            cfg.n_mc = n_mc;
            cfg.pretrain = pretrain;
            cfg.pretrain_epochs = pretrain_epochs;
            cfg.predict_samples = predict_samples;
            cfg.seed = seed;
            return std::make_unique<BnnPosteriorModel>(train_bnn(scaled_train, cfg));
        },
        py::arg("train"), py::arg("hidden") = std::vector<int>{64, 64, 64},
        py::arg("epochs") = 2000, py::arg("batch_size") = 100, py::arg("learning_rate") = 0.001,
        py::arg("n_mc") = 1, py::arg("pretrain") = true, py::arg("pretrain_epochs") = 2000,
        py::arg("predict_samples") = 1000, py::arg("seed") = 0);
    m.def("load_posterior", &load_posterior, py::arg("path"));

    m.def(
        "icp_bound",
        [](const Posterior& p, const Dataset& cal, double eps) {
            GuaranteeBound b = icp_bound(p, cal, eps);
            return py::make_tuple(b.tau, b.vacuous);
        },
        py::arg("posterior"), py::arg("calibration"), py::arg("epsilon") = 0.05,
        "Returns (tau, vacuous)");
    m.def(
        "nicp_bound",
        [](const Posterior& p, const Dataset& cal, double eps, const std::string& normalizer) {
            GuaranteeBound b = nicp_bound(p, cal, eps, normalizer_from_string(normalizer));
            return py::make_tuple(b.tau, b.vacuous);
        },
        py::arg("posterior"), py::arg("calibration"), py::arg("epsilon") = 0.05,
        py::arg("normalizer") = "posterior-std", "Returns (tau_tilde, vacuous)");
    m.def("conformal_quantile",
          [](std::vector<double> scores, double eps) {
              ConformalQuantile q = conformal_quantile(std::move(scores), eps);
              return py::make_tuple(q.tau, q.rank, q.vacuous);
          },
          py::arg("scores"), py::arg("epsilon"), "Returns (tau, rank, vacuous)");
    m.def("chernoff_half_width", &chernoff_half_width, py::arg("m_trials"), py::arg("epsilon2"));
    m.def("pac_bayes_bound", &pac_bayes_bound, py::arg("empirical_error"), py::arg("kl"),
          py::arg("n"), py::arg("epsilon"), py::arg("c") = 1.0);

    m.def(
        "evaluate",
        [](const Posterior& p, const Dataset& test, double eps, double z) {
            EvaluationReport r = evaluate(p, test, eps, z);
            py::dict out;
            out["rmse"] = r.rmse;
            out["accuracy"] = r.accuracy;
            out["uncertainty_width"] = r.uncertainty_width;
            out["test_uncertainty_width"] = r.test_uncertainty_width;
            return out;
        },
        py::arg("posterior"), py::arg("test"), py::arg("epsilon") = 0.05, py::arg("z") = 1.96);
}
