#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svsmc/rng.hpp"

namespace svsmc {

enum class RateLaw { MassAction, DensityScaled };

struct Reaction {
    std::vector<int> reactants;  // stoichiometry alpha, one entry per species
    std::vector<int> products;   // stoichiometry beta
    RateLaw rate_law = RateLaw::MassAction;
    int param_index = 0;
    std::string label;

    std::vector<int> update() const {
        std::vector<int> nu(products.size());
        for (size_t i = 0; i < nu.size(); ++i) nu[i] = products[i] - reactants[i];
        return nu;
    }
};

struct ParamInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool degenerate() const { return hi <= lo; }
};

struct PctmcModel {
    std::vector<std::string> species;
    std::vector<long long> init_state;
    std::vector<Reaction> reactions;
    std::vector<ParamInterval> param_space;
    std::optional<long long> population_size_constant;

    int species_count() const { return static_cast<int>(species.size()); }
    int reaction_count() const { return static_cast<int>(reactions.size()); }
    int param_dim() const { return static_cast<int>(param_space.size()); }
    int species_index(const std::string& name) const;  // -1 when absent
};

// Event-based sample path: state k holds on [times[k], times[k+1]),
// the last state holds up to the horizon.
struct Trajectory {
    int n_species = 0;
    std::vector<double> times;
    std::vector<double> states;  // row-major, one row per event
    double horizon = 0.0;

    int steps() const { return static_cast<int>(times.size()); }
    const double* state(int k) const { return states.data() + static_cast<size_t>(k) * n_species; }
    double value_at(int species, double t) const;
    int segment_index(double t) const;
};

// Returns one human-readable message per violated invariant; empty means valid.
std::vector<std::string> validate_model(const PctmcModel& model);

double propensity(const PctmcModel& model, const std::vector<long long>& state,
                  const std::vector<double>& params, int reaction_index);

// Gillespie direct method.
Trajectory ssa_simulate(const PctmcModel& model, const std::vector<double>& params,
                        double horizon, Rng& rng);

// Random well-formed model with r reactions over at most r+1 species,
// parameter space [0.001, 1]^r.
PctmcModel random_pctmc(int r, Rng& rng);

PctmcModel model_from_json_text(const std::string& text);
PctmcModel load_model(const std::string& path);
std::string model_to_json_text(const PctmcModel& model);
void save_model(const PctmcModel& model, const std::string& path);

// FNV-1a content hash of the canonical JSON form, as fixed-width hex.
std::string model_content_hash(const PctmcModel& model);

}  // namespace svsmc
