#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "svsmc/rng.hpp"
#include "svsmc/stl.hpp"

#include "stl_oracle.hpp"

using namespace svsmc;

using svsmc::testing::BruteForceMonitor;
using svsmc::testing::make_traj;
using svsmc::testing::random_formula;
using svsmc::testing::random_signal;
using BruteForce = BruteForceMonitor;

namespace {

const std::vector<std::string> kAB{"A", "B"};

}  // namespace

TEST_CASE("parser handles the epidemic-termination property") {
    FormulaPtr f = parse_stl("(I > 0) U[100,120] (I == 0)");
    REQUIRE(f->kind == StlFormula::Kind::Until);
    CHECK(f->t_lo == 100.0);
    CHECK(f->t_hi == 120.0);
    CHECK(f->a->kind == StlFormula::Kind::Atom);
    CHECK(f->b->kind == StlFormula::Kind::Atom);
    CHECK(f->b->cmp == CmpOp::Eq);
}

TEST_CASE("parser desugars F, G, and the protein-switch property") {
    FormulaPtr f = parse_stl("G[0,300](L1p - L3p >= 0) & F[300,600](L3p - L1p >= 0)");
    REQUIRE(f->kind == StlFormula::Kind::And);
    // G desugars to !(true U ! ...)
    CHECK(f->a->kind == StlFormula::Kind::Not);
    CHECK(f->a->a->kind == StlFormula::Kind::Until);
    CHECK(f->a->a->a->kind == StlFormula::Kind::True);
    // F desugars to true U ...
    CHECK(f->b->kind == StlFormula::Kind::Until);
    CHECK(f->b->a->kind == StlFormula::Kind::True);
    CHECK(temporal_depth(*f) == 600.0);
}

TEST_CASE("parser reports syntax errors with a position") {
    CHECK_THROWS_AS(parse_stl("F[0,10]"), ParseError);
    CHECK_THROWS_AS(parse_stl("(I > 0"), ParseError);
    CHECK_THROWS_AS(parse_stl("I >"), ParseError);
    CHECK_THROWS_AS(parse_stl("U[1,2] x > 0"), ParseError);
    CHECK_THROWS_AS(parse_stl("F[2,1] (A > 0)"), ParseError);  // empty interval
    try {
        parse_stl("F[0,10]");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("position") != std::string::npos);
    }
}

TEST_CASE("atom signals on constant and jumping trajectories") {
    Trajectory t = make_traj({0.0}, {{5.0}}, 10.0);
    std::vector<std::string> sp{"S"};
    FormulaPtr atom = parse_stl("S > 3");
    BoolSignal s = atom_signal(*atom, t, sp);
    REQUIRE(s.intervals().size() == 1);
    CHECK(s.intervals()[0].lo == 0.0);
    CHECK(s.intervals()[0].hi == 10.0);
    CHECK(s.contains(0.0));
    CHECK(s.contains(10.0));

    Trajectory t2 = make_traj({0.0, 2.0}, {{5.0}, {1.0}}, 10.0);
    BoolSignal s2 = atom_signal(*atom, t2, sp);
    REQUIRE(s2.intervals().size() == 1);
    CHECK(s2.contains(0.0));
    CHECK(s2.contains(1.999));
    CHECK(!s2.contains(2.0));

    FormulaPtr unbound = parse_stl("Q > 0");
    CHECK_THROWS_WITH_AS(atom_signal(*unbound, t, sp) /* unused */,
                         doctest::Contains("unbound identifier"), std::runtime_error);
}

TEST_CASE("D() compares against the previous jump event") {
    Trajectory t = make_traj({0.0, 1.0, 3.0}, {{2.0}, {5.0}, {4.0}}, 6.0);
    std::vector<std::string> sp{"X"};
    FormulaPtr up = parse_stl("D(X) > 0");
    BoolSignal s = atom_signal(*up, t, sp);
    // delta is 0 on [0,1), +3 on [1,3), -1 on [3,6]
    CHECK(!s.contains(0.5));
    CHECK(s.contains(1.0));
    CHECK(s.contains(2.9));
    CHECK(!s.contains(3.0));
    CHECK(!s.contains(5.0));
}

TEST_CASE("monitor on the worked examples") {
    std::vector<std::string> sp{"I"};
    FormulaPtr truef = parse_stl("true");
    Trajectory any = make_traj({0.0}, {{3.0}}, 5.0);
    CHECK(monitor(*truef, any, sp));

    FormulaPtr u = parse_stl("(I>0) U[1,2] (I==0)");
    Trajectory t = make_traj({0.0, 1.5}, {{3.0}, {0.0}}, 5.0);
    CHECK(monitor(*u, t, sp));

    std::vector<std::string> sps{"S"};
    FormulaPtr g = parse_stl("G[0,4](S>=1)");
    Trajectory t2 = make_traj({0.0, 3.0}, {{1.0}, {0.0}}, 5.0);
    CHECK(!monitor(*g, t2, sps));

    // bounded-until horizon must fit
    Trajectory shallow = make_traj({0.0}, {{1.0}}, 2.0);
    CHECK_THROWS_WITH_AS(monitor(*g, shallow, sps), doctest::Contains("temporal depth"),
                         std::runtime_error);
}

TEST_CASE("monitor matches the brute-force oracle on random signals and formulas") {
    int checked = 0;
    for (int it = 0; it < 1000; ++it) {
        Rng rng(derive_seed(2024, it));
        Trajectory traj = random_signal(rng);
        FormulaPtr f = random_formula(rng, 1 + static_cast<int>(rng.below(3)));
        if (temporal_depth(*f) > traj.horizon) continue;
        BruteForce oracle(traj, kAB);
        bool expect = oracle.eval(*f, 0.0);
        bool got = monitor(*f, traj, kAB);
        CHECK(got == expect);
        ++checked;
    }
    CHECK(checked > 800);
}

TEST_CASE("full satisfaction signal matches the oracle pointwise") {
    for (int it = 0; it < 120; ++it) {
        Rng rng(derive_seed(77, it));
        Trajectory traj = random_signal(rng);
        FormulaPtr f = random_formula(rng, 2);
        if (temporal_depth(*f) > traj.horizon) continue;
        BoolSignal s = satisfaction_signal(*f, traj, kAB);
        BruteForce oracle(traj, kAB);
        for (double t = 0.0; t <= traj.horizon; t += 0.125)
            CHECK(s.contains(t) == oracle.eval(*f, t));
    }
}

TEST_CASE("desugaring identities and De Morgan hold extensionally") {
    for (int it = 0; it < 1000; ++it) {
        Rng rng(derive_seed(55, it));
        Trajectory traj = random_signal(rng);
        FormulaPtr inner = random_formula(rng, 1);
        std::string itext = "(" + pretty_print(*inner) + ")";
        FormulaPtr f1 = parse_stl("F[0.5,2] " + itext);
        FormulaPtr f2 = parse_stl("true U[0.5,2] " + itext);
        FormulaPtr g1 = parse_stl("G[0.5,2] " + itext);
        FormulaPtr g2 = parse_stl("!(F[0.5,2] !" + itext + ")");
        CHECK(monitor(*f1, traj, kAB) == monitor(*f2, traj, kAB));
        CHECK(monitor(*g1, traj, kAB) == monitor(*g2, traj, kAB));

        FormulaPtr a = random_formula(rng, 1);
        FormulaPtr b = random_formula(rng, 1);
        std::string at = "(" + pretty_print(*a) + ")", bt = "(" + pretty_print(*b) + ")";
        FormulaPtr dm1 = parse_stl("!(" + at + " & " + bt + ")");
        FormulaPtr dm2 = parse_stl("!" + at + " | !" + bt);
        CHECK(monitor(*dm1, traj, kAB) == monitor(*dm2, traj, kAB));
    }
}

TEST_CASE("parse - pretty-print round trip is a fixed point") {
    for (int it = 0; it < 300; ++it) {
        Rng rng(derive_seed(99, it));
        FormulaPtr f = random_formula(rng, 3);
        std::string printed = pretty_print(*f);
        FormulaPtr re = parse_stl(printed);
        CHECK(formula_equal(*f, *re));
        CHECK(pretty_print(*re) == printed);
    }
    // unbounded interval round trip
    FormulaPtr u = parse_stl("(A > 0) U[2,inf] (B > 1)");
    CHECK(std::isinf(u->t_hi));
    CHECK(formula_equal(*u, *parse_stl(pretty_print(*u))));
}

TEST_CASE("unbounded until clips to the horizon and fails closed") {
    std::vector<std::string> sp{"A", "B"};
    // A > 0 until B > 0, where B never rises: false
    Trajectory t = make_traj({0.0}, {{1.0, 0.0}}, 5.0);
    FormulaPtr f = parse_stl("(A>0) U[2,inf] (B>0)");
    CHECK(!monitor(*f, t, sp));
    // B rises at 3: witness inside [2, horizon]
    Trajectory t2 = make_traj({0.0, 3.0}, {{1.0, 0.0}, {1.0, 1.0}}, 5.0);
    CHECK(monitor(*f, t2, sp));
}
