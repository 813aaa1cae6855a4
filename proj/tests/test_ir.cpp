#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "fsim/flatten.hpp"
#include "fsim/ir.hpp"
#include "fsim/validate.hpp"

#include "support/gen.hpp"
#include "support/paths.hpp"

using namespace fsim;

static FactoredPOMDP load_fixture(const std::string& name) {
    ValidateResult vr = validate_source(testpath::slurp(testpath::repo("fixtures/programs/" + name)));
    REQUIRE(vr.ok());
    return vr.pomdp;
}

TEST_CASE("scope sets sort, dedup, and compare") {
    ScopeSet s = ScopeSet::of({"b", "a", "b", "c"});
    CHECK(s.variable_ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(s.contains("a"));
    CHECK(s.contains("c"));
    CHECK_FALSE(s.contains("d"));
    CHECK_FALSE(s.empty());
    CHECK(ScopeSet::of({}).empty());

    ScopeSet t = ScopeSet::of({"c", "d"});
    CHECK(s.overlaps(t));
    CHECK(t.overlaps(s));
    CHECK_FALSE(t.overlaps(ScopeSet::of({"a", "b"})));
    CHECK(s.unioned(t) == ScopeSet::of({"a", "b", "c", "d"}));
    CHECK(ScopeSet::of({"x", "y"}) == ScopeSet::of({"y", "x"}));
}

TEST_CASE("evaluation order ranks controller, model, reward, view") {
    CHECK(kind_rank(FactorKind::Controller) < kind_rank(FactorKind::Model));
    CHECK(kind_rank(FactorKind::Model) < kind_rank(FactorKind::Reward));
    CHECK(kind_rank(FactorKind::Reward) < kind_rank(FactorKind::View));

    std::vector<Factor> fs(4);
    fs[0].id = "v";
    fs[0].kind = FactorKind::View;
    fs[1].id = "m2";
    fs[1].kind = FactorKind::Model;
    fs[1].order_index = 1;
    fs[2].id = "m1";
    fs[2].kind = FactorKind::Model;
    fs[2].order_index = 0;
    fs[3].id = "c";
    fs[3].kind = FactorKind::Controller;
    sort_evaluation_order(fs);
    CHECK(fs[0].id == "c");
    CHECK(fs[1].id == "m1");
    CHECK(fs[2].id == "m2");
    CHECK(fs[3].id == "v");
}

TEST_CASE("domain ordinal round trip") {
    Domain b;
    b.kind = DomainKind::Bool;
    Domain i;
    i.kind = DomainKind::Int;
    i.lo = -2;
    i.hi = 3;
    Domain e;
    e.kind = DomainKind::Enum;
    e.labels = {"A", "B", "C"};

    for (long long k = 0; k < domain_card(b); ++k) CHECK(domain_ord(b, domain_nth(b, k)) == k);
    for (long long k = 0; k < domain_card(i); ++k) CHECK(domain_ord(i, domain_nth(i, k)) == k);
    for (long long k = 0; k < domain_card(e); ++k) CHECK(domain_ord(e, domain_nth(e, k)) == k);
    CHECK(domain_card(i) == 6);

    Value v;
    v.num = -2;
    CHECK(domain_contains(i, v));
    v.num = 4;
    CHECK_FALSE(domain_contains(i, v));
    v.num = 0.5;
    CHECK_FALSE(domain_contains(i, v));
    Domain r;
    r.kind = DomainKind::Real;
    r.lo = 0;
    r.hi = 1;
    v.num = 0.5;
    CHECK(domain_contains(r, v));
}

TEST_CASE("joint state indexing is a bijection") {
    FactoredPOMDP p = load_fixture("chain.fsim");
    // real-valued score blocks enumeration; narrow it for the index math
    p.variables[0].domain.kind = DomainKind::Int;
    p.variables[0].domain.lo = 0;
    p.variables[0].domain.hi = 1;
    long long n = joint_state_count(p);
    CHECK(n == 2 * 3 * 2);
    std::set<long long> seen;
    for (long long s = 0; s < n; ++s) {
        std::vector<Value> vals = index_to_state(p, s);
        CHECK(state_to_index(p, vals) == s);
        seen.insert(s);
    }
    CHECK(static_cast<long long>(seen.size()) == n);
}

TEST_CASE("increments are writes, not reads") {
    FactoredPOMDP p = load_fixture("catcher.fsim");
    const Factor* scoring = find_factor(p, "scoring");
    REQUIRE(scoring != nullptr);
    BodyInfo info = analyze_body(scoring->body);
    int score = variable_index(p, "score");
    CHECK(info.increments.count(score) == 1);
    CHECK(info.reads.count(score) == 0);
    CHECK(info.reads.count(variable_index(p, "hit")) == 1);
    CHECK(info.reads.count(variable_index(p, "miss")) == 1);
    CHECK_FALSE(info.uses_action);
}

TEST_CASE("check_pomdp accepts the shipped fixtures") {
    for (const char* name : {"catcher.fsim", "pong.fsim", "chain.fsim", "corridor.fsim"}) {
        FactoredPOMDP p = load_fixture(name);
        CHECK_FALSE(has_errors(check_pomdp(p)));
    }
}

TEST_CASE("check_pomdp rejects structural damage") {
    FactoredPOMDP good = load_fixture("chain.fsim");

    SECTION("duplicate variable id") {
        FactoredPOMDP p = good;
        p.variables.push_back(p.variables[1]);
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::DuplicateId);
    }
    SECTION("duplicate factor id") {
        FactoredPOMDP p = good;
        p.factors.push_back(p.factors[0]);
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::DuplicateId);
    }
    SECTION("missing NOOP") {
        FactoredPOMDP p = good;
        p.actions = {"GO", "STAY"};
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::UnknownAction);
    }
    SECTION("unresolvable score id") {
        FactoredPOMDP p = good;
        p.score_id = "points";
        p.score_index = -1;
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::InvalidScore);
    }
    SECTION("score must be numeric") {
        FactoredPOMDP p = good;
        p.variables[0].domain = Domain{};  // bool
        p.variables[0].init = Init{};
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::InvalidScore);
    }
    SECTION("max_steps must be positive") {
        FactoredPOMDP p = good;
        p.max_steps = 0;
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::InvalidDomain);
    }
    SECTION("inverted domain bounds") {
        FactoredPOMDP p = good;
        p.variables[1].domain.lo = 5;
        p.variables[1].domain.hi = 0;
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::InvalidDomain);
    }
    SECTION("init outside domain") {
        FactoredPOMDP p = good;
        p.variables[1].init.point.num = 99;
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::InvalidDomain);
    }
    SECTION("categorical init weights must sum to one") {
        FactoredPOMDP p = good;
        p.variables[1].init.kind = InitKind::Categorical;
        p.variables[1].init.values = {0, 1};
        p.variables[1].init.weights = {0.5, 0.6};
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        CHECK(diags.front().code == DiagCode::NonNormalizedInit);
    }
    SECTION("reward factor retargeted away from the score") {
        FactoredPOMDP p = good;
        for (auto& f : p.factors)
            if (f.kind == FactorKind::Reward) f.targets = ScopeSet::of({"pos"});
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        bool found = false;
        for (const auto& d : diags)
            if (d.code == DiagCode::RewardNotIncrement) found = true;
        CHECK(found);
    }
    SECTION("view factor given targets") {
        FactoredPOMDP p = load_fixture("catcher.fsim");
        for (auto& f : p.factors)
            if (f.kind == FactorKind::View) f.targets = ScopeSet::of({"paddle_x"});
        auto diags = check_pomdp(p);
        REQUIRE(has_errors(diags));
        bool found = false;
        for (const auto& d : diags)
            if (d.code == DiagCode::ViewWritesState) found = true;
        CHECK(found);
    }
}

TEST_CASE("initial program is the score-only starting point") {
    FactoredPOMDP p = initial_pomdp({"LEFT", "RIGHT"}, "game");
    CHECK(p.meta.name == "game");
    CHECK(p.actions == std::vector<std::string>{"LEFT", "RIGHT", "NOOP"});
    CHECK(p.variables.size() == 1);
    CHECK(p.score_id == "score");
    CHECK(p.score_index == 0);
    CHECK(p.variables[0].domain.kind == DomainKind::Real);
    CHECK(p.max_steps == 200);
    CHECK(p.factors.empty());
    CHECK_FALSE(has_errors(check_pomdp(p)));

    FactoredPOMDP q = initial_pomdp({"NOOP"});
    CHECK(q.actions == std::vector<std::string>{"NOOP"});
}

TEST_CASE("add_variable enforces freshness and init integrity") {
    FactoredPOMDP p = initial_pomdp({"GO"});
    StateVariable v;
    v.id = "pos";
    v.name = "pos";
    v.domain.kind = DomainKind::Int;
    v.domain.lo = 0;
    v.domain.hi = 3;
    v.init.kind = InitKind::Point;
    v.init.point.num = 0;
    FactoredPOMDP q = add_variable(p, v);
    CHECK(variable_index(q, "pos") == 1);
    CHECK(q.score_index == 0);
    CHECK_THROWS_AS(add_variable(q, v), SimError);

    StateVariable bad = v;
    bad.id = "other";
    bad.init.point.num = 17;
    try {
        add_variable(p, bad);
        FAIL("expected a domain error");
    } catch (const SimError& e) {
        CHECK(e.code() == DiagCode::InvalidDomain);
    }
}

TEST_CASE("scope overlap query matches a brute-force scan") {
    Rng rng(4242);
    testgen::GenConfig cfg;
    for (int trial = 0; trial < 30; ++trial) {
        std::string src = testgen::random_program_source(rng);
        ValidateResult vr = validate_source(src);
        REQUIRE(vr.ok());
        const FactoredPOMDP& p = vr.pomdp;

        std::vector<std::string> ids;
        for (const auto& v : p.variables)
            if (rng.below(2) == 0) ids.push_back(v.id);
        if (ids.empty()) ids.push_back(p.variables[rng.below(p.variables.size())].id);
        ScopeSet z = ScopeSet::of(ids);

        std::vector<std::string> expected;
        for (const auto& f : p.factors) {
            bool touches = false;
            for (const auto& id : z.variable_ids) {
                for (const auto& s : f.scope.variable_ids)
                    if (s == id) touches = true;
                for (const auto& t : f.targets.variable_ids)
                    if (t == id) touches = true;
            }
            if (touches) expected.push_back(f.id);
        }

        std::vector<std::string> got;
        for (const auto& f : scope_overlap_query(p, z)) got.push_back(f.id);
        CHECK(got == expected);
    }
}

TEST_CASE("scope overlap query returns factors in evaluation order") {
    FactoredPOMDP p = load_fixture("catcher.fsim");
    ScopeSet z = ScopeSet::of({"paddle_x", "fruit_y"});
    auto out = scope_overlap_query(p, z);
    REQUIRE(out.size() >= 2);
    for (std::size_t i = 1; i < out.size(); ++i)
        CHECK(kind_rank(out[i - 1].kind) <= kind_rank(out[i].kind));
    CHECK_THROWS_AS(scope_overlap_query(p, ScopeSet::of({"ghost"})), SimError);
    try {
        scope_overlap_query(p, ScopeSet::of({"ghost"}));
    } catch (const SimError& e) {
        CHECK(e.code() == DiagCode::UnknownVariable);
    }
}

TEST_CASE("structural edits append, replace, and re-check") {
    FactoredPOMDP p = load_fixture("chain.fsim");

    SECTION("adding a duplicate factor without replace throws") {
        Patch patch;
        patch.factors.push_back({p.factors[0], false});
        CHECK_THROWS_AS(apply_structural_edit(p, patch), SimError);
    }
    SECTION("replace keeps the slot of a same-kind factor") {
        Factor f = *find_factor(p, "advance");
        Patch patch;
        patch.factors.push_back({f, true});
        FactoredPOMDP q = apply_structural_edit(p, patch);
        CHECK(q.factors.size() == p.factors.size());
        CHECK(find_factor(q, "advance")->order_index ==
              find_factor(p, "advance")->order_index);
    }
    SECTION("new factors are appended with a fresh order index") {
        Factor f = *find_factor(p, "advance");
        f.id = "advance2";
        Patch patch;
        patch.factors.push_back({f, false});
        FactoredPOMDP q = apply_structural_edit(p, patch);
        CHECK(q.factors.size() == p.factors.size() + 1);
        CHECK(find_factor(q, "advance2")->order_index ==
              find_factor(q, "advance")->order_index + 1);
    }
    SECTION("an edit that breaks scoping is rejected whole") {
        Factor f = *find_factor(p, "advance");
        f.scope = ScopeSet::of({});  // body still reads pos
        Patch patch;
        patch.factors.push_back({f, true});
        try {
            apply_structural_edit(p, patch);
            FAIL("expected a scope violation");
        } catch (const SimError& e) {
            CHECK(e.code() == DiagCode::ScopeViolation);
        }
    }
    SECTION("new variables land before factor processing") {
        StateVariable v;
        v.id = "fuel";
        v.name = "fuel";
        v.domain.kind = DomainKind::Int;
        v.domain.lo = 0;
        v.domain.hi = 5;
        v.init.kind = InitKind::Point;
        v.init.point.num = 5;
        Patch patch;
        patch.new_variables.push_back(v);
        FactoredPOMDP q = apply_structural_edit(p, patch);
        CHECK(variable_index(q, "fuel") >= 0);
        CHECK(q.score_index == variable_index(q, q.score_id));
    }
}

TEST_CASE("structural equality ignores spans but not substance") {
    FactoredPOMDP a = load_fixture("corridor.fsim");
    FactoredPOMDP b = load_fixture("corridor.fsim");
    CHECK(structural_equal(a, b));

    SECTION("max_steps differs") {
        b.max_steps += 1;
        CHECK_FALSE(structural_equal(a, b));
    }
    SECTION("init differs") {
        b.variables[1].init.point.num += 1;
        CHECK_FALSE(structural_equal(a, b));
    }
    SECTION("factor body differs") {
        b.factors[0].body.clear();
        CHECK_FALSE(structural_equal(a, b));
    }
    SECTION("span-only difference is invisible") {
        b.factors[0].span.line = 999;
        b.variables[1].span.col = 77;
        CHECK(structural_equal(a, b));
    }
}
