#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "fsim/format.hpp"
#include "fsim/parse.hpp"
#include "fsim/validate.hpp"

#include "support/gen.hpp"
#include "support/paths.hpp"

using namespace fsim;

static bool has_code(const std::vector<Diagnostic>& ds, DiagCode code) {
    for (const auto& d : ds)
        if (d.code == code) return true;
    return false;
}

static const char* kMinimal = R"(
actions GO
score score
max_steps 10

var score : real[-10, 10] init 0
)";

TEST_CASE("minimal program validates and fills defaults") {
    ValidateResult vr = validate_source(kMinimal);
    REQUIRE(vr.ok());
    CHECK(vr.pomdp.actions == std::vector<std::string>{"GO", "NOOP"});
    CHECK(vr.pomdp.max_steps == 10);
    CHECK(vr.pomdp.score_index == 0);
}

TEST_CASE("max_steps defaults to 200 when omitted") {
    ValidateResult vr = validate_source(
        "actions GO\nscore score\nvar score : real[-1, 1] init 0\n");
    REQUIRE(vr.ok());
    CHECK(vr.pomdp.max_steps == 200);
}

TEST_CASE("parse reports failures as diagnostics, never throws") {
    SECTION("empty source") {
        ParseResult pr = parse("   \n\t ");
        REQUIRE_FALSE(pr.ok());
        CHECK(pr.diags.front().code == DiagCode::MissingDeclaration);
    }
    SECTION("unterminated string") {
        ParseResult pr = parse("name \"oops\nactions GO\n");
        REQUIRE_FALSE(pr.ok());
        CHECK(has_code(pr.diags, DiagCode::UnterminatedString));
    }
    SECTION("malformed number") {
        ParseResult pr = parse("actions GO\nscore s\nvar s : real[0, 1e] init 0\n");
        REQUIRE_FALSE(pr.ok());
        CHECK(has_code(pr.diags, DiagCode::InvalidNumber));
    }
    SECTION("unknown function") {
        ParseResult pr = parse(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "model m {\n  scope s\n  targets s\n  s := frobnicate(1)\n}\n");
        REQUIRE_FALSE(pr.ok());
        CHECK(has_code(pr.diags, DiagCode::UnknownFunction));
    }
    SECTION("wrong arity") {
        ParseResult pr = parse(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "model m {\n  scope s\n  targets s\n  s := clamp(1, 2)\n}\n");
        REQUIRE_FALSE(pr.ok());
        CHECK(has_code(pr.diags, DiagCode::BadArity));
    }
    SECTION("duplicate actions line") {
        ParseResult pr = parse("actions GO\nactions STOP\nscore s\nvar s : real[0, 1] init 0\n");
        REQUIRE_FALSE(pr.ok());
        CHECK(has_code(pr.diags, DiagCode::DuplicateDeclaration));
    }
    SECTION("runaway nesting is cut off") {
        std::string body(400, '(');
        ParseResult pr = parse(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "model m {\n  scope s\n  targets s\n  s := " + body + "1\n}\n");
        REQUIRE_FALSE(pr.ok());
        CHECK(has_code(pr.diags, DiagCode::NestingTooDeep));
    }
}

TEST_CASE("validation catches name and kind misuse") {
    SECTION("reserved word as variable id") {
        ValidateResult vr = validate_source(
            "actions GO\nscore clamp\nvar clamp : real[0, 1] init 0\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::ReservedWord));
    }
    SECTION("undeclared read") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "model m {\n  scope s\n  targets s\n  s := ghost\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::UndeclaredVariable));
    }
    SECTION("read outside declared scope") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\nvar x : int[0, 3] init 0\n"
            "model m {\n  targets x\n  x := x + 1\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::ScopeViolation));
    }
    SECTION("write outside declared targets") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\nvar x : int[0, 3] init 0\n"
            "model m {\n  scope x\n  x := 1\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::ScopeViolation));
    }
    SECTION("action keyword outside a controller") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\nvar x : int[0, 3] init 0\n"
            "model m {\n  scope x\n  targets x\n  if action == GO { x := 1 }\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::ActionOutsideController));
    }
    SECTION("view writing state") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\nvar x : int[0, 3] init 0\n"
            "view v {\n  scope x\n  targets x\n  x := 1\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::ViewWritesState));
    }
    SECTION("shapes emitted outside a view") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\nvar x : int[0, 3] init 0\n"
            "model m {\n  scope x\n  targets x\n  rect(0, 0, 4, 4, red)\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::EmitOutsideView));
    }
    SECTION("reward assigning instead of incrementing") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "reward r {\n  s := 1\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::RewardNotIncrement));
    }
    SECTION("unknown color") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\nvar x : int[0, 3] init 0\n"
            "view v {\n  scope x\n  rect(x, 0, 4, 4, chartreuse)\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::UnknownColor));
    }
    SECTION("score variable must exist") {
        ValidateResult vr = validate_source(
            "actions GO\nscore points\nvar s : real[0, 1] init 0\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::InvalidScore));
    }
    SECTION("ambiguous enum label") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "var a : enum{RED, BLUE} init RED\nvar b : enum{BLUE, RED} init RED\n"
            "model m {\n  scope a\n  targets a\n  a := BLUE\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::UndeclaredVariable));
    }
    SECTION("vector variables are element-wise only") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "var vs : vec(3)[0, 9] init (1, 2, 3)\n"
            "model m {\n  scope vs\n  targets vs\n  vs := 1\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::InvalidDomain));
    }
    SECTION("let bindings are not assignable") {
        ValidateResult vr = validate_source(
            "actions GO\nscore s\nvar s : real[0, 1] init 0\n"
            "model m {\n  targets s\n  let t = 3\n  t := 4\n}\n");
        REQUIRE_FALSE(vr.ok());
        CHECK(has_code(vr.diags, DiagCode::UnknownTarget));
    }
}

TEST_CASE("shipped fixtures round-trip through format") {
    for (const char* name :
         {"catcher.fsim", "pong.fsim", "chain.fsim", "corridor.fsim", "catcher-wide.fsim",
          "catcher-harsh.fsim", "catcher-drift.fsim"}) {
        INFO(name);
        std::string src = testpath::slurp(testpath::repo(std::string("fixtures/programs/") + name));
        ValidateResult first = validate_source(src);
        REQUIRE(first.ok());
        std::string canon = format(first.pomdp);
        ValidateResult second = validate_source(canon);
        REQUIRE(second.ok());
        CHECK(structural_equal(first.pomdp, second.pomdp));
        CHECK(format(second.pomdp) == canon);
    }
}

TEST_CASE("generated programs round-trip through format") {
    Rng rng(20250301);
    for (int trial = 0; trial < 120; ++trial) {
        std::string src = testgen::random_program_source(rng);
        INFO(src);
        ValidateResult first = validate_source(src);
        REQUIRE(first.ok());
        std::string canon = format(first.pomdp);
        ValidateResult second = validate_source(canon);
        REQUIRE(second.ok());
        CHECK(structural_equal(first.pomdp, second.pomdp));
        CHECK(format(second.pomdp) == canon);
    }
}

TEST_CASE("formatter emits variables and factors in canonical order") {
    ValidateResult vr = validate_source(testpath::slurp(testpath::repo("fixtures/programs/catcher.fsim")));
    REQUIRE(vr.ok());
    std::string canon = format(vr.pomdp);
    std::size_t steer = canon.find("controller steer");
    std::size_t fall = canon.find("model fall");
    std::size_t scoring = canon.find("reward scoring");
    std::size_t scene = canon.find("view scene");
    REQUIRE(steer != std::string::npos);
    CHECK(steer < fall);
    CHECK(fall < scoring);
    CHECK(scoring < scene);
    CHECK(canon.find("actions LEFT RIGHT NOOP") != std::string::npos);
}

TEST_CASE("format_number is shortest-round-trip stable") {
    CHECK(format_number(0.0) == "0");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(-2.5) == "-2.5");
    CHECK(format_number(0.1) == "0.1");
    double third = 1.0 / 3.0;
    CHECK(std::stod(format_number(third)) == third);
}

TEST_CASE("parser survives mutated source without crashing") {
    Rng rng(777);
    std::string base = testpath::slurp(testpath::repo("fixtures/programs/pong.fsim"));
    for (int trial = 0; trial < 200; ++trial) {
        std::string mangled = base;
        int edits = 1 + static_cast<int>(rng.below(4));
        for (int e = 0; e < edits; ++e) {
            if (mangled.empty()) mangled = "x";
            std::size_t pos = rng.below(mangled.size());
            switch (rng.below(3)) {
                case 0: mangled[pos] = static_cast<char>(32 + rng.below(95)); break;
                case 1: mangled.erase(pos, 1 + rng.below(5)); break;
                default: mangled.insert(pos, "{"); break;
            }
        }
        ParseResult pr = parse(mangled);
        if (pr.ok()) validate(pr.program);  // either way, no crash and no throw
    }
}

TEST_CASE("statement fragments parse standalone") {
    StatementsResult ok = parse_statements("x := 1\nif x > 0 { score += 2 } else { score += 0 }\n");
    CHECK(ok.ok());
    CHECK(ok.block.size() == 2);

    StatementsResult bad = parse_statements("x := := 1");
    CHECK_FALSE(bad.ok());
}
