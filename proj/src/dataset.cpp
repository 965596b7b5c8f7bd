#include "svsmc/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace svsmc {

using nlohmann::json;

SamplingStrategy sampling_strategy_from_string(const std::string& s) {
    if (s == "uniform-grid") return SamplingStrategy::UniformGrid;
    if (s == "uniform-random") return SamplingStrategy::UniformRandom;
    if (s == "log-random") return SamplingStrategy::LogRandom;
    throw std::invalid_argument("unknown sampling strategy: " + s);
}

std::string sampling_strategy_to_string(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::UniformGrid: return "uniform-grid";
        case SamplingStrategy::UniformRandom: return "uniform-random";
        case SamplingStrategy::LogRandom: return "log-random";
    }
    return "";
}

DatasetRole role_from_string(const std::string& s) {
    if (s == "train") return DatasetRole::Train;
    if (s == "calibration") return DatasetRole::Calibration;
    if (s == "test") return DatasetRole::Test;
    throw std::invalid_argument("unknown dataset role: " + s);
}

std::string role_to_string(DatasetRole r) {
    switch (r) {
        case DatasetRole::Train: return "train";
        case DatasetRole::Calibration: return "calibration";
        case DatasetRole::Test: return "test";
    }
    return "";
}

std::vector<double> Scaling::scale(const std::vector<double>& theta) const {
    std::vector<double> out(theta.size());
    for (size_t k = 0; k < theta.size(); ++k) {
        double w = hi[k] - lo[k];
        out[k] = w > 0.0 ? 2.0 * (theta[k] - lo[k]) / w - 1.0 : 0.0;
    }
    return out;
}

std::vector<double> Scaling::unscale(const std::vector<double>& x) const {
    std::vector<double> out(x.size());
    for (size_t k = 0; k < x.size(); ++k) {
        double w = hi[k] - lo[k];
        out[k] = w > 0.0 ? lo[k] + 0.5 * (x[k] + 1.0) * w : lo[k];
    }
    return out;
}

Scaling scaling_from_space(const std::vector<ParamInterval>& space) {
    Scaling s;
    for (const auto& iv : space) {
        s.lo.push_back(iv.lo);
        s.hi.push_back(iv.hi);
    }
    return s;
}

int Dataset::trials() const {
    if (points.empty()) throw std::logic_error("trials(): empty dataset");
    return points[0].trials;
}

void Dataset::check_invariants() const {
    for (const auto& p : points) {
        if (p.trials <= 0) throw std::invalid_argument("dataset: trials must be positive");
        if (p.successes < 0 || p.successes > p.trials)
            throw std::invalid_argument("dataset: successes out of [0, trials]");
        if (!points.empty() && p.trials != points[0].trials)
            throw std::invalid_argument("dataset: all points must share one trial count");
        if (p.theta.size() != points[0].theta.size())
            throw std::invalid_argument("dataset: inconsistent parameter dimension");
    }
}

std::vector<std::vector<double>> sample_parameters(const std::vector<ParamInterval>& space,
                                                   int n, SamplingStrategy strategy, Rng& rng) {
    if (n < 1) throw std::invalid_argument("sample_parameters: n must be >= 1");
    const int d = static_cast<int>(space.size());
    std::vector<std::vector<double>> out;
    out.reserve(n);

    if (strategy == SamplingStrategy::LogRandom) {
        for (const auto& iv : space)
            if (!(iv.lo > 0.0))
                throw std::invalid_argument("sample_parameters: log-random needs positive bounds");
    }

    if (strategy == SamplingStrategy::UniformGrid) {
        std::vector<int> active;
        for (int k = 0; k < d; ++k)
            if (!space[k].degenerate()) active.push_back(k);
        const int da = static_cast<int>(active.size());
        int per = n;
        if (da > 1) {
            int guess = static_cast<int>(std::llround(std::pow(static_cast<double>(n), 1.0 / da)));
            per = 0;
            for (int c = std::max(1, guess - 1); c <= guess + 1; ++c) {
                long long prod = 1;
                for (int k = 0; k < da; ++k) prod *= c;
                if (prod == n) {
                    per = c;
                    break;
                }
            }
            if (per == 0)
                throw std::invalid_argument(
                    "sample_parameters: grid size must be a perfect power of the number of free "
                    "dimensions");
        }
        if (da == 0) per = 1;
        std::vector<int> idx(da, 0);
        for (int i = 0; i < n; ++i) {
            std::vector<double> theta(d);
            for (int k = 0; k < d; ++k) theta[k] = space[k].lo;
            for (int a = 0; a < da; ++a) {
                const auto& iv = space[active[a]];
                theta[active[a]] =
                    per == 1 ? iv.lo : iv.lo + (iv.hi - iv.lo) * idx[a] / (per - 1);
            }
            out.push_back(std::move(theta));
            for (int a = da - 1; a >= 0; --a) {
                if (++idx[a] < per) break;
                idx[a] = 0;
            }
        }
        return out;
    }

    for (int i = 0; i < n; ++i) {
        std::vector<double> theta(d);
        for (int k = 0; k < d; ++k) {
            const auto& iv = space[k];
            if (iv.degenerate()) {
                theta[k] = iv.lo;
            } else if (strategy == SamplingStrategy::UniformRandom) {
                theta[k] = rng.uniform(iv.lo, iv.hi);
            } else {
                theta[k] = std::exp(rng.uniform(std::log(iv.lo), std::log(iv.hi)));
            }
        }
        out.push_back(std::move(theta));
    }
    return out;
}

Dataset generate_dataset(const PctmcModel& model, const FormulaPtr& formula,
                         const std::vector<std::vector<double>>& thetas, int m_trials,
                         double horizon, DatasetRole role, std::uint64_t base_seed,
                         int threads) {
    if (m_trials < 1) throw std::invalid_argument("generate_dataset: trials must be >= 1");
    if (temporal_depth(*formula) > horizon)
        throw std::invalid_argument("generate_dataset: formula horizon exceeds simulation horizon");
    const int n = static_cast<int>(thetas.size());
    Dataset ds;
    ds.role = role;
    ds.points.resize(n);

    int hw = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    hw = std::min(hw, n);

    auto worker = [&](int first, int last) {
        for (int i = first; i < last; ++i) {
            int successes = 0;
            for (int j = 0; j < m_trials; ++j) {
                Rng run_rng(derive_seed(base_seed, static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(j)));
                Trajectory traj = ssa_simulate(model, thetas[i], horizon, run_rng);
                if (monitor(*formula, traj, model.species)) ++successes;
            }
            ds.points[i].theta = thetas[i];
            ds.points[i].successes = successes;
            ds.points[i].trials = m_trials;
        }
    };

    if (hw <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> pool;
        int chunk = (n + hw - 1) / hw;
        for (int t = 0; t < hw; ++t) {
            int first = t * chunk;
            int last = std::min(n, first + chunk);
            if (first >= last) break;
            pool.emplace_back(worker, first, last);
        }
        for (auto& th : pool) th.join();
    }
    return ds;
}

Dataset scale_inputs(const Dataset& dataset, const std::vector<ParamInterval>& space) {
    Dataset out = dataset;
    out.scaling = scaling_from_space(space);
    for (auto& p : out.points) p.theta = out.scaling.scale(p.theta);
    out.scaled = true;
    return out;
}

SmcEstimate smc_estimate(int successes, int trials, double z) {
    if (trials < 1) throw std::invalid_argument("smc_estimate: trials must be >= 1");
    SmcEstimate e;
    e.mean = static_cast<double>(successes) / trials;
    if (trials > 1) {
        double var = trials * e.mean * (1.0 - e.mean) / (trials - 1.0);
        e.std = std::sqrt(var);
    }
    e.ci_halfwidth = z * e.std / std::sqrt(static_cast<double>(trials));
    return e;
}

void save_dataset(const Dataset& dataset, const DatasetMeta& meta, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("cannot write dataset file " + csv_path);
    const int d = dataset.dim();
    for (int k = 0; k < d; ++k) out << "theta_" << k << ",";
    out << "successes,trials\n";
    char buf[40];
    for (const auto& p : dataset.points) {
        for (int k = 0; k < d; ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", p.theta[k]);
            out << buf << ",";
        }
        out << p.successes << "," << p.trials << "\n";
    }

    json j;
    j["role"] = meta.role.empty() ? role_to_string(dataset.role) : meta.role;
    j["seed"] = meta.seed;
    j["model_hash"] = meta.model_hash;
    j["formula"] = meta.formula;
    j["param_space"] = json::array();
    for (const auto& iv : meta.param_space) j["param_space"].push_back({iv.lo, iv.hi});
    j["scaled"] = dataset.scaled;
    std::ofstream meta_out(csv_path + ".meta.json");
    meta_out << j.dump(2) << "\n";
}

Dataset load_dataset(const std::string& csv_path, DatasetMeta* meta_out) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("cannot open dataset file " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty dataset file " + csv_path);
    int d = 0;
    {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, ','))
            if (col.rfind("theta_", 0) == 0) ++d;
    }
    Dataset ds;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        DataPoint p;
        for (int k = 0; k < d; ++k) {
            if (!std::getline(ss, cell, ',')) throw std::runtime_error("short row in " + csv_path);
            p.theta.push_back(std::stod(cell));
        }
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("short row in " + csv_path);
        p.successes = std::stoi(cell);
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("short row in " + csv_path);
        p.trials = std::stoi(cell);
        ds.points.push_back(std::move(p));
    }
    ds.check_invariants();

    std::ifstream meta_in(csv_path + ".meta.json");
    if (meta_in) {
        json j = json::parse(meta_in);
        ds.role = role_from_string(j.value("role", "train"));
        if (meta_out) {
            meta_out->role = j.value("role", "train");
            meta_out->seed = j.value("seed", 0ULL);
            meta_out->model_hash = j.value("model_hash", "");
            meta_out->formula = j.value("formula", "");
            meta_out->param_space.clear();
            if (j.contains("param_space"))
                for (const auto& iv : j["param_space"])
                    meta_out->param_space.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
        }
    }
    return ds;
}

}  // namespace svsmc
