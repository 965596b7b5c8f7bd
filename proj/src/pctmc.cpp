#include "svsmc/pctmc.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace svsmc {

using nlohmann::json;

int PctmcModel::species_index(const std::string& name) const {
    for (size_t i = 0; i < species.size(); ++i)
        if (species[i] == name) return static_cast<int>(i);
    return -1;
}

int Trajectory::segment_index(double t) const {
    // last k with times[k] <= t
    auto it = std::upper_bound(times.begin(), times.end(), t);
    return static_cast<int>(it - times.begin()) - 1;
}

double Trajectory::value_at(int species, double t) const {
    int k = segment_index(t);
    if (k < 0) k = 0;
    return state(k)[species];
}

std::vector<std::string> validate_model(const PctmcModel& model) {
    std::vector<std::string> out;
    const size_t n = model.species.size();
    if (model.init_state.size() != n)
        out.push_back("init_state length " + std::to_string(model.init_state.size()) +
                      " does not match species count " + std::to_string(n));
    for (long long c : model.init_state)
        if (c < 0) out.push_back("init_state contains a negative count");
    if (model.reactions.size() != model.param_space.size())
        out.push_back("reaction count " + std::to_string(model.reactions.size()) +
                      " does not match parameter dimension " +
                      std::to_string(model.param_space.size()));
    for (size_t i = 0; i < model.reactions.size(); ++i) {
        const Reaction& r = model.reactions[i];
        const std::string who = "reaction " + (r.label.empty() ? std::to_string(i) : r.label);
        if (r.reactants.size() != n || r.products.size() != n) {
            out.push_back(who + ": stoichiometry length does not match species count");
            continue;
        }
        int total_reactants = 0;
        for (size_t j = 0; j < n; ++j) {
            if (r.reactants[j] < 0 || r.products[j] < 0)
                out.push_back(who + ": negative stoichiometry for species " + model.species[j]);
            total_reactants += r.reactants[j];
        }
        if (total_reactants > 2)
            out.push_back(who + ": total reactant multiplicity exceeds 2");
        if (r.param_index < 0 || r.param_index >= static_cast<int>(model.param_space.size()))
            out.push_back(who + ": parameter index out of range");
        if (r.rate_law == RateLaw::DensityScaled && !model.population_size_constant)
            out.push_back(who + ": density-scaled rate law without population_size_constant");
    }
    for (const auto& iv : model.param_space)
        if (!(iv.lo <= iv.hi)) out.push_back("parameter interval with lo > hi");
    return out;
}

double propensity(const PctmcModel& model, const std::vector<long long>& state,
                  const std::vector<double>& params, int reaction_index) {
    if (reaction_index < 0 || reaction_index >= model.reaction_count())
        throw std::out_of_range("propensity: reaction index out of range");
    const Reaction& r = model.reactions[reaction_index];
    double a = params[r.param_index];
    for (size_t j = 0; j < r.reactants.size(); ++j) {
        for (int c = 0; c < r.reactants[j]; ++c) {
            long long avail = state[j] - c;
            if (avail <= 0) return 0.0;
            a *= static_cast<double>(avail);
        }
    }
    if (r.rate_law == RateLaw::DensityScaled) {
        if (!model.population_size_constant)
            throw std::logic_error("propensity: density-scaled law requires N");
        a /= static_cast<double>(*model.population_size_constant);
    }
    return a;
}

Trajectory ssa_simulate(const PctmcModel& model, const std::vector<double>& params,
                        double horizon, Rng& rng) {
    if (!(horizon > 0.0)) throw std::invalid_argument("ssa_simulate: horizon must be positive");
    if (params.size() != static_cast<size_t>(model.param_dim()))
        throw std::invalid_argument("ssa_simulate: parameter vector has wrong dimension");
    const int n = model.species_count();
    const int r = model.reaction_count();
    std::vector<long long> state = model.init_state;
    std::vector<double> props(r);

    Trajectory traj;
    traj.n_species = n;
    traj.horizon = horizon;
    auto record = [&](double t) {
        traj.times.push_back(t);
        for (int j = 0; j < n; ++j) traj.states.push_back(static_cast<double>(state[j]));
    };
    double t = 0.0;
    record(t);
    for (;;) {
        double a0 = 0.0;
        for (int i = 0; i < r; ++i) {
            props[i] = propensity(model, state, params, i);
            a0 += props[i];
        }
        if (a0 <= 0.0) break;  // absorbing state
        t += rng.exponential(a0);
        if (t > horizon) break;
        double u = rng.uniform01() * a0;
        int pick = r - 1;
        double cum = 0.0;
        for (int i = 0; i < r; ++i) {
            cum += props[i];
            if (u <= cum) {
                pick = i;
                break;
            }
        }
        const Reaction& re = model.reactions[pick];
        for (int j = 0; j < n; ++j) state[j] += re.products[j] - re.reactants[j];
        record(t);
    }
    return traj;
}

namespace {

enum class ReactionShape { TwoToOne, OneToTwo, Conversion, Degradation, Birth };

ReactionShape draw_shape(Rng& rng) {
    double u = rng.uniform01();
    if (u < 0.25) return ReactionShape::TwoToOne;
    if (u < 0.50) return ReactionShape::OneToTwo;
    if (u < 0.75) return ReactionShape::Conversion;
    if (u < 0.875) return ReactionShape::Degradation;
    return ReactionShape::Birth;
}

Reaction draw_reaction(ReactionShape shape, int pool, Rng& rng) {
    Reaction re;
    re.reactants.assign(pool, 0);
    re.products.assign(pool, 0);
    switch (shape) {
        case ReactionShape::TwoToOne: {
            re.reactants[rng.below(pool)] += 1;
            re.reactants[rng.below(pool)] += 1;
            re.products[rng.below(pool)] += 1;
            break;
        }
        case ReactionShape::OneToTwo: {
            re.reactants[rng.below(pool)] += 1;
            re.products[rng.below(pool)] += 1;
            re.products[rng.below(pool)] += 1;
            break;
        }
        case ReactionShape::Conversion: {
            int i = static_cast<int>(rng.below(pool)), j;
            do {
                j = static_cast<int>(rng.below(pool));
            } while (j == i);
            re.reactants[i] += 1;
            re.products[j] += 1;
            break;
        }
        case ReactionShape::Degradation:
            re.reactants[rng.below(pool)] += 1;
            break;
        case ReactionShape::Birth:
            re.products[rng.below(pool)] += 1;
            break;
    }
    return re;
}

}  // namespace

PctmcModel random_pctmc(int r, Rng& rng) {
    if (r < 1) throw std::invalid_argument("random_pctmc: need at least one reaction");
    const int pool = r + 1;

    std::vector<Reaction> reactions;
    reactions.reserve(r);
    for (int i = 0; i < r; ++i) {
        // The reaction shape is drawn once so shape frequencies stay exactly
        // multinomial; only the species assignment is redrawn on redundancy.
        ReactionShape shape = draw_shape(rng);
        for (int attempt = 0;; ++attempt) {
            Reaction cand = draw_reaction(shape, pool, rng);
            bool duplicate = false;
            for (const Reaction& prev : reactions)
                if (prev.reactants == cand.reactants && prev.products == cand.products) {
                    duplicate = true;
                    break;
                }
            if (!duplicate) {
                cand.param_index = i;
                cand.label = "R" + std::to_string(i + 1);
                reactions.push_back(std::move(cand));
                break;
            }
            if (attempt > 100000)
                throw std::runtime_error("random_pctmc: could not resolve redundancy");
        }
    }

    std::vector<long long> pool_init(pool);
    for (int j = 0; j < pool; ++j) pool_init[j] = rng.uniform_int(0, 10);

    // Keep only species that participate in some reaction.
    std::vector<int> keep;
    for (int j = 0; j < pool; ++j) {
        bool used = false;
        for (const Reaction& re : reactions)
            if (re.reactants[j] > 0 || re.products[j] > 0) {
                used = true;
                break;
            }
        if (used) keep.push_back(j);
    }

    PctmcModel model;
    for (size_t k = 0; k < keep.size(); ++k) {
        model.species.push_back("S" + std::to_string(keep[k] + 1));
        model.init_state.push_back(pool_init[keep[k]]);
    }
    for (Reaction& re : reactions) {
        Reaction trimmed = re;
        trimmed.reactants.clear();
        trimmed.products.clear();
        for (int j : keep) {
            trimmed.reactants.push_back(re.reactants[j]);
            trimmed.products.push_back(re.products[j]);
        }
        model.reactions.push_back(std::move(trimmed));
    }
    model.param_space.assign(r, ParamInterval{0.001, 1.0});
    return model;
}

namespace {

RateLaw rate_law_from_string(const std::string& s) {
    if (s == "mass_action") return RateLaw::MassAction;
    if (s == "density_scaled") return RateLaw::DensityScaled;
    throw std::invalid_argument("unknown rate_law: " + s);
}

std::string rate_law_to_string(RateLaw law) {
    return law == RateLaw::MassAction ? "mass_action" : "density_scaled";
}

}  // namespace

PctmcModel model_from_json_text(const std::string& text) {
    json j = json::parse(text);
    PctmcModel m;
    m.species = j.at("species").get<std::vector<std::string>>();
    m.init_state = j.at("init_state").get<std::vector<long long>>();
    for (const auto& jr : j.at("reactions")) {
        Reaction r;
        r.reactants.assign(m.species.size(), 0);
        r.products.assign(m.species.size(), 0);
        for (auto it = jr.at("reactants").begin(); it != jr.at("reactants").end(); ++it) {
            int idx = m.species_index(it.key());
            if (idx < 0) throw std::invalid_argument("reaction references unknown species " + it.key());
            r.reactants[idx] = it.value().get<int>();
        }
        for (auto it = jr.at("products").begin(); it != jr.at("products").end(); ++it) {
            int idx = m.species_index(it.key());
            if (idx < 0) throw std::invalid_argument("reaction references unknown species " + it.key());
            r.products[idx] = it.value().get<int>();
        }
        r.rate_law = rate_law_from_string(jr.at("rate_law").get<std::string>());
        r.param_index = jr.at("param_index").get<int>();
        r.label = jr.value("label", "");
        m.reactions.push_back(std::move(r));
    }
    for (const auto& iv : j.at("param_space"))
        m.param_space.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    if (j.contains("population_size_constant") && !j.at("population_size_constant").is_null())
        m.population_size_constant = j.at("population_size_constant").get<long long>();
    return m;
}

std::string model_to_json_text(const PctmcModel& m) {
    json j;
    j["species"] = m.species;
    j["init_state"] = m.init_state;
    j["reactions"] = json::array();
    for (const Reaction& r : m.reactions) {
        json jr;
        jr["reactants"] = json::object();
        jr["products"] = json::object();
        for (size_t i = 0; i < m.species.size(); ++i) {
            if (r.reactants[i] > 0) jr["reactants"][m.species[i]] = r.reactants[i];
            if (r.products[i] > 0) jr["products"][m.species[i]] = r.products[i];
        }
        jr["rate_law"] = rate_law_to_string(r.rate_law);
        jr["param_index"] = r.param_index;
        jr["label"] = r.label;
        j["reactions"].push_back(std::move(jr));
    }
    j["param_space"] = json::array();
    for (const auto& iv : m.param_space) j["param_space"].push_back({iv.lo, iv.hi});
    if (m.population_size_constant)
        j["population_size_constant"] = *m.population_size_constant;
    else
        j["population_size_constant"] = nullptr;
    return j.dump(2);
}

PctmcModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json_text(ss.str());
}

void save_model(const PctmcModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file " + path);
    out << model_to_json_text(model) << "\n";
}

std::string model_content_hash(const PctmcModel& model) {
    std::string text = model_to_json_text(model);
    std::uint64_t h = tag_hash(text);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace svsmc
