#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "fsim/flatten.hpp"
#include "fsim/validate.hpp"

#include "support/gen.hpp"
#include "support/paths.hpp"

using namespace fsim;

TEST_CASE("choice enumeration walks every branch exactly once") {
    // two draws per run: bernoulli(0.25) then a three-way uniform
    EnumChoice choice;
    std::map<std::pair<bool, long long>, double> seen;
    do {
        choice.begin_run();
        bool b = choice.bernoulli(0.25);
        long long u = choice.uniform_int(0, 2);
        seen[{b, u}] += choice.path_prob();
    } while (choice.advance());
    REQUIRE(seen.size() == 6);
    double total = 0;
    for (const auto& [key, prob] : seen) {
        double expect = (key.first ? 0.25 : 0.75) / 3.0;
        CHECK(std::fabs(prob - expect) < 1e-15);
        total += prob;
    }
    CHECK(std::fabs(total - 1.0) < 1e-15);
}

TEST_CASE("enumeration handles branch-dependent draw counts") {
    // the second draw happens on one branch only
    EnumChoice choice;
    double total = 0;
    int leaves = 0;
    do {
        choice.begin_run();
        if (choice.bernoulli(0.5)) choice.uniform_int(0, 3);
        total += choice.path_prob();
        ++leaves;
    } while (choice.advance());
    CHECK(leaves == 5);
    CHECK(std::fabs(total - 1.0) < 1e-15);
}

TEST_CASE("continuous domains cannot be enumerated") {
    ValidateResult vr = validate_source(
        "actions GO\nscore s\nmax_steps 5\nvar s : real[-9, 9] init 0\n");
    REQUIRE(vr.ok());
    CHECK_THROWS_AS(flatten_enumerate(vr.pomdp), SimError);
    try {
        flatten_enumerate(vr.pomdp);
    } catch (const SimError& e) {
        CHECK(e.code() == DiagCode::NotFinite);
    }
}

TEST_CASE("joint tables over the cap are refused") {
    ValidateResult vr = validate_source(
        "actions GO\nscore s\nmax_steps 5\n"
        "var s : int[-3, 3] init 0\nvar a : int[0, 9] init 0\nvar b : int[0, 9] init 0\n");
    REQUIRE(vr.ok());
    CHECK_THROWS_AS(flatten_enumerate(vr.pomdp, 100), SimError);
    try {
        flatten_enumerate(vr.pomdp, 100);
    } catch (const SimError& e) {
        CHECK(e.code() == DiagCode::CapExceeded);
    }
}

TEST_CASE("a deterministic factored program flattens to point rows") {
    ValidateResult vr = validate_source(
        "actions GO STAY\nscore s\nmax_steps 9\n"
        "var s : int[-3, 3] init 0\nvar x : int[0, 2] init 0\n"
        "controller c {\n  scope x\n  targets x\n"
        "  if action == GO { x := min(x + 1, 2) }\n}\n"
        "reward r {\n  scope x\n  if x == 2 { s += 1 }\n}\n");
    REQUIRE(vr.ok());
    const FactoredPOMDP& p = vr.pomdp;
    JointTable table = flatten_enumerate(p);
    CHECK(table.n_states == 7 * 3);
    REQUIRE(table.actions == p.actions);
    for (long long s = 0; s < table.n_states; ++s) {
        for (std::size_t a = 0; a < table.actions.size(); ++a) {
            const StateDist& row = table.row(s, a);
            REQUIRE(row.size() == 1);
            CHECK(row.begin()->second == 1.0);
            StateDist direct = step_distribution(p, index_to_state(p, s), table.actions[a]);
            REQUIRE(direct.size() == 1);
            CHECK(direct.begin()->first == row.begin()->first);
        }
    }
}

TEST_CASE("per-factor kernels and whole-step enumeration agree on a random branch") {
    ValidateResult vr = validate_source(
        "actions GO\nscore s\nmax_steps 9\n"
        "var s : int[-3, 3] init 0\nvar x : int[0, 2] init 0\n"
        "model drift {\n  scope x\n  targets x\n"
        "  if bernoulli(0.25) { x := min(x + 1, 2) } else { x := max(x - 1, 0) }\n}\n");
    REQUIRE(vr.ok());
    const FactoredPOMDP& p = vr.pomdp;
    std::vector<Value> start = index_to_state(p, state_to_index(p, [&] {
        std::vector<Value> v(p.variables.size());
        v[0].num = 0;
        v[1].num = 1;
        return v;
    }()));
    StateDist direct = step_distribution(p, start, "GO");
    REQUIRE(direct.size() == 2);
    JointTable table = flatten_enumerate(p);
    const StateDist& row = table.row(state_to_index(p, start), 0);
    REQUIRE(row.size() == 2);
    for (const auto& [idx, prob] : row) {
        REQUIRE(direct.count(idx) == 1);
        CHECK(std::fabs(direct.at(idx) - prob) < 1e-15);
    }
    // x=1 moves up w.p. 0.25 and down w.p. 0.75
    std::vector<Value> up(p.variables.size()), down(p.variables.size());
    up[1].num = 2;
    down[1].num = 0;
    CHECK(std::fabs(direct.at(state_to_index(p, up)) - 0.25) < 1e-15);
    CHECK(std::fabs(direct.at(state_to_index(p, down)) - 0.75) < 1e-15);
}

TEST_CASE("generated programs: factored flattening matches whole-step enumeration") {
    Rng rng(31337);
    int checked_rows = 0;
    for (int trial = 0; trial < 12; ++trial) {
        std::string src = testgen::random_program_source(rng);
        INFO(src);
        ValidateResult vr = validate_source(src);
        REQUIRE(vr.ok());
        const FactoredPOMDP& p = vr.pomdp;
        JointTable table = flatten_enumerate(p, 200000);
        for (long long s = 0; s < table.n_states; ++s) {
            std::vector<Value> start = index_to_state(p, s);
            for (std::size_t a = 0; a < table.actions.size(); ++a) {
                StateDist direct = step_distribution(p, start, table.actions[a]);
                const StateDist& row = table.row(s, a);
                REQUIRE(direct.size() == row.size());
                double mass = 0;
                for (const auto& [idx, prob] : row) {
                    REQUIRE(direct.count(idx) == 1);
                    CHECK(std::fabs(direct.at(idx) - prob) <= 1e-12);
                    mass += prob;
                }
                CHECK(std::fabs(mass - 1.0) <= 1e-9);
                ++checked_rows;
            }
        }
    }
    CHECK(checked_rows > 100);
}

TEST_CASE("sampled transition frequencies track the exact distribution") {
    ValidateResult vr = validate_source(
        "actions GO\nscore s\nmax_steps 9\n"
        "var s : int[-3, 3] init 0\nvar x : int[0, 3] init 0\n"
        "model jump {\n  scope x\n  targets x\n  x := uniform_int(0, 3)\n}\n");
    REQUIRE(vr.ok());
    const FactoredPOMDP& p = vr.pomdp;
    std::vector<Value> start(p.variables.size());
    StateDist exact = step_distribution(p, start, "GO");

    const int n = 20000;
    std::map<long long, int> counts;
    StreamRouter router(2024);
    for (int k = 0; k < n; ++k) {
        SimState st;
        st.values = start;
        StepResult r = step(p, st, "GO", router);
        counts[state_to_index(p, r.state.values)] += 1;
    }
    // chi-square against the exact probabilities; 3 dof, 0.999 quantile ~16.27
    double chi2 = 0;
    for (const auto& [idx, prob] : exact) {
        double expect = prob * n;
        double got = counts.count(idx) ? counts.at(idx) : 0;
        chi2 += (got - expect) * (got - expect) / expect;
    }
    CHECK(chi2 < 16.27);
}
