#pragma once

#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "svsmc/pctmc.hpp"

namespace svsmc {

struct ParseError : std::runtime_error {
    size_t position;
    ParseError(const std::string& msg, size_t pos)
        : std::runtime_error(msg + " (at position " + std::to_string(pos) + ")"),
          position(pos) {}
};

// Arithmetic expression over species values; D(name) is the one-step
// difference against the previous jump event.
struct Expr {
    enum class Kind { Constant, Species, Delta, Add, Sub, Mul };
    Kind kind;
    double value = 0.0;      // Constant
    std::string name;        // Species / Delta
    int species_index = -1;  // bound at monitor time
    std::shared_ptr<Expr> lhs, rhs;
};

enum class CmpOp { Lt, Le, Gt, Ge, Eq };

// Core STL AST: True | Atom | Not | And | Until. F, G and | are desugared
// by the parser.
struct StlFormula {
    enum class Kind { True, Atom, Not, And, Until };
    Kind kind;
    // Atom
    std::shared_ptr<Expr> lhs, rhs;
    CmpOp cmp = CmpOp::Lt;
    // Not / And / Until
    std::shared_ptr<const StlFormula> a, b;
    // Until interval; t_hi may be +infinity
    double t_lo = 0.0, t_hi = 0.0;
};

using FormulaPtr = std::shared_ptr<const StlFormula>;

FormulaPtr parse_stl(const std::string& text);
std::string pretty_print(const StlFormula& f);
bool formula_equal(const StlFormula& a, const StlFormula& b);

// Maximum look-ahead the formula needs; [a,inf) contributes its lower bound
// since the upper end is clipped to the trajectory horizon.
double temporal_depth(const StlFormula& f);

// A subset of [0, horizon] as sorted disjoint intervals. Endpoint-openness is
// tracked explicitly: with closed until-windows the exact satisfaction sets
// of nested formulas are not unions of half-open intervals in general.
struct TimeInterval {
    double lo = 0.0, hi = 0.0;
    bool lo_closed = true, hi_closed = true;
    bool valid() const { return lo < hi || (lo == hi && lo_closed && hi_closed); }
};

class BoolSignal {
public:
    BoolSignal() = default;
    explicit BoolSignal(double horizon) : horizon_(horizon) {}
    BoolSignal(double horizon, std::vector<TimeInterval> ivs);

    double horizon() const { return horizon_; }
    const std::vector<TimeInterval>& intervals() const { return ivs_; }
    bool contains(double t) const;
    bool empty() const { return ivs_.empty(); }

    BoolSignal complement() const;
    BoolSignal intersect(const BoolSignal& o) const;
    BoolSignal unite(const BoolSignal& o) const;
    // Satisfaction set of (this U_[a,b] other) under closed-window semantics.
    BoolSignal until(const BoolSignal& other, double a, double b) const;

private:
    void normalize();
    double horizon_ = 0.0;
    std::vector<TimeInterval> ivs_;
};

// Truth signal of a single comparison atom over a trajectory.
BoolSignal atom_signal(const StlFormula& atom, const Trajectory& traj,
                       const std::vector<std::string>& species);

// Satisfaction of the whole formula over the trajectory.
BoolSignal satisfaction_signal(const StlFormula& f, const Trajectory& traj,
                               const std::vector<std::string>& species);

// Boolean satisfaction at time 0. Throws when identifiers do not bind or the
// temporal depth exceeds the trajectory horizon.
bool monitor(const StlFormula& f, const Trajectory& traj,
             const std::vector<std::string>& species);

inline bool monitor(const FormulaPtr& f, const Trajectory& traj, const PctmcModel& model) {
    return monitor(*f, traj, model.species);
}

}  // namespace svsmc
