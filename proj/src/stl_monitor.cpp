#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "svsmc/stl.hpp"

namespace svsmc {

namespace {

TimeInterval intersect_iv(const TimeInterval& a, const TimeInterval& b) {
    TimeInterval r;
    if (a.lo > b.lo) {
        r.lo = a.lo;
        r.lo_closed = a.lo_closed;
    } else if (a.lo < b.lo) {
        r.lo = b.lo;
        r.lo_closed = b.lo_closed;
    } else {
        r.lo = a.lo;
        r.lo_closed = a.lo_closed && b.lo_closed;
    }
    if (a.hi < b.hi) {
        r.hi = a.hi;
        r.hi_closed = a.hi_closed;
    } else if (a.hi > b.hi) {
        r.hi = b.hi;
        r.hi_closed = b.hi_closed;
    } else {
        r.hi = a.hi;
        r.hi_closed = a.hi_closed && b.hi_closed;
    }
    return r;
}

}  // namespace

BoolSignal::BoolSignal(double horizon, std::vector<TimeInterval> ivs)
    : horizon_(horizon), ivs_(std::move(ivs)) {
    normalize();
}

void BoolSignal::normalize() {
    const TimeInterval domain{0.0, horizon_, true, true};
    std::vector<TimeInterval> clipped;
    clipped.reserve(ivs_.size());
    for (const auto& iv : ivs_) {
        TimeInterval c = intersect_iv(iv, domain);
        if (c.valid()) clipped.push_back(c);
    }
    std::sort(clipped.begin(), clipped.end(), [](const TimeInterval& x, const TimeInterval& y) {
        if (x.lo != y.lo) return x.lo < y.lo;
        return x.lo_closed && !y.lo_closed;
    });
    ivs_.clear();
    for (const auto& iv : clipped) {
        if (!ivs_.empty()) {
            TimeInterval& cur = ivs_.back();
            bool joins = iv.lo < cur.hi ||
                         (iv.lo == cur.hi && (iv.lo_closed || cur.hi_closed));
            if (joins) {
                if (iv.hi > cur.hi) {
                    cur.hi = iv.hi;
                    cur.hi_closed = iv.hi_closed;
                } else if (iv.hi == cur.hi) {
                    cur.hi_closed = cur.hi_closed || iv.hi_closed;
                }
                continue;
            }
        }
        ivs_.push_back(iv);
    }
}

bool BoolSignal::contains(double t) const {
    for (const auto& iv : ivs_) {
        if (t < iv.lo || (t == iv.lo && !iv.lo_closed)) continue;
        if (t < iv.hi || (t == iv.hi && iv.hi_closed)) return true;
    }
    return false;
}

BoolSignal BoolSignal::complement() const {
    std::vector<TimeInterval> out;
    double lo = 0.0;
    bool lo_closed = true;
    for (const auto& iv : ivs_) {
        TimeInterval gap{lo, iv.lo, lo_closed, !iv.lo_closed};
        if (gap.valid()) out.push_back(gap);
        lo = iv.hi;
        lo_closed = !iv.hi_closed;
    }
    TimeInterval tail{lo, horizon_, lo_closed, true};
    if (tail.valid()) out.push_back(tail);
    return BoolSignal(horizon_, std::move(out));
}

BoolSignal BoolSignal::intersect(const BoolSignal& o) const {
    std::vector<TimeInterval> out;
    for (const auto& x : ivs_)
        for (const auto& y : o.ivs_) {
            if (y.lo > x.hi) break;
            TimeInterval r = intersect_iv(x, y);
            if (r.valid()) out.push_back(r);
        }
    return BoolSignal(horizon_, std::move(out));
}

BoolSignal BoolSignal::unite(const BoolSignal& o) const {
    std::vector<TimeInterval> all = ivs_;
    all.insert(all.end(), o.ivs_.begin(), o.ivs_.end());
    return BoolSignal(horizon_, std::move(all));
}

BoolSignal BoolSignal::until(const BoolSignal& psi, double a, double b) const {
    const double b_eff = std::min(b, horizon_);  // no witnesses past the horizon
    std::vector<TimeInterval> out;
    if (a == 0.0)
        out.insert(out.end(), psi.ivs_.begin(), psi.ivs_.end());
    for (const auto& I : ivs_) {
        // A witness t' > t inside one phi-interval [t, t') <= I can sit
        // anywhere in (I.lo, I.hi]; the right end is reachable because the
        // phi requirement is on the half-open [t, t').
        TimeInterval wdom{I.lo, I.hi, false, true};
        for (const auto& K : psi.ivs_) {
            TimeInterval W = intersect_iv(K, wdom);
            if (!W.valid()) continue;
            TimeInterval cand;
            cand.lo = W.lo - b_eff;
            cand.lo_closed = W.lo_closed;
            cand.hi = W.hi - a;
            cand.hi_closed = a > 0.0 ? W.hi_closed : false;
            TimeInterval T = intersect_iv(cand, I);
            if (T.valid()) out.push_back(T);
        }
    }
    return BoolSignal(horizon_, std::move(out));
}

namespace {

int bind_species(const std::string& name, const std::vector<std::string>& species) {
    for (size_t i = 0; i < species.size(); ++i)
        if (species[i] == name) return static_cast<int>(i);
    throw std::runtime_error("unbound identifier '" + name + "' in STL atom");
}

double eval_expr(const Expr& e, const double* cur, const double* prev,
                 const std::vector<std::string>& species) {
    switch (e.kind) {
        case Expr::Kind::Constant: return e.value;
        case Expr::Kind::Species: return cur[bind_species(e.name, species)];
        case Expr::Kind::Delta: {
            int idx = bind_species(e.name, species);
            return prev ? cur[idx] - prev[idx] : 0.0;
        }
        case Expr::Kind::Add:
            return eval_expr(*e.lhs, cur, prev, species) + eval_expr(*e.rhs, cur, prev, species);
        case Expr::Kind::Sub:
            return eval_expr(*e.lhs, cur, prev, species) - eval_expr(*e.rhs, cur, prev, species);
        case Expr::Kind::Mul:
            return eval_expr(*e.lhs, cur, prev, species) * eval_expr(*e.rhs, cur, prev, species);
    }
    return 0.0;
}

bool compare(double l, CmpOp op, double r) {
    switch (op) {
        case CmpOp::Lt: return l < r;
        case CmpOp::Le: return l <= r;
        case CmpOp::Gt: return l > r;
        case CmpOp::Ge: return l >= r;
        case CmpOp::Eq: return l == r;
    }
    return false;
}

}  // namespace

BoolSignal atom_signal(const StlFormula& atom, const Trajectory& traj,
                       const std::vector<std::string>& species) {
    if (atom.kind != StlFormula::Kind::Atom)
        throw std::invalid_argument("atom_signal: formula is not an atom");
    const int steps = traj.steps();
    std::vector<TimeInterval> out;
    for (int k = 0; k < steps; ++k) {
        const double* cur = traj.state(k);
        const double* prev = k > 0 ? traj.state(k - 1) : nullptr;
        bool truth = compare(eval_expr(*atom.lhs, cur, prev, species), atom.cmp,
                             eval_expr(*atom.rhs, cur, prev, species));
        if (!truth) continue;
        TimeInterval iv;
        iv.lo = traj.times[k];
        iv.lo_closed = true;
        if (k + 1 < steps) {
            iv.hi = traj.times[k + 1];
            iv.hi_closed = false;
        } else {
            iv.hi = traj.horizon;
            iv.hi_closed = true;  // the last state holds up to the horizon
        }
        out.push_back(iv);
    }
    return BoolSignal(traj.horizon, std::move(out));
}

BoolSignal satisfaction_signal(const StlFormula& f, const Trajectory& traj,
                               const std::vector<std::string>& species) {
    switch (f.kind) {
        case StlFormula::Kind::True: {
            std::vector<TimeInterval> all{TimeInterval{0.0, traj.horizon, true, true}};
            return BoolSignal(traj.horizon, std::move(all));
        }
        case StlFormula::Kind::Atom: return atom_signal(f, traj, species);
        case StlFormula::Kind::Not:
            return satisfaction_signal(*f.a, traj, species).complement();
        case StlFormula::Kind::And:
            return satisfaction_signal(*f.a, traj, species)
                .intersect(satisfaction_signal(*f.b, traj, species));
        case StlFormula::Kind::Until:
            return satisfaction_signal(*f.a, traj, species)
                .until(satisfaction_signal(*f.b, traj, species), f.t_lo, f.t_hi);
    }
    throw std::logic_error("satisfaction_signal: unknown node");
}

bool monitor(const StlFormula& f, const Trajectory& traj,
             const std::vector<std::string>& species) {
    if (temporal_depth(f) > traj.horizon)
        throw std::runtime_error("formula temporal depth " +
                                 std::to_string(temporal_depth(f)) +
                                 " exceeds trajectory horizon " + std::to_string(traj.horizon));
    return satisfaction_signal(f, traj, species).contains(0.0);
}

}  // namespace svsmc
