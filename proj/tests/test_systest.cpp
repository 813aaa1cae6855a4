#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "fsim/systest.hpp"
#include "fsim/validate.hpp"

#include "support/paths.hpp"

using namespace fsim;

namespace {

FactoredPOMDP load_program(const std::string& rel) {
    ValidateResult vr = validate_source(testpath::slurp(testpath::repo(rel)));
    REQUIRE(vr.ok());
    return vr.pomdp;
}

std::vector<SystemTest> suite_of(const std::string& json_text) {
    return parse_suite(json_text);
}

SystemTest single(const std::string& json_text) {
    std::vector<SystemTest> tests =
        suite_of(R"({"tests": [)" + json_text + "]}");
    REQUIRE(tests.size() == 1);
    return tests[0];
}

}  // namespace

TEST_CASE("suite documents are validated before anything runs") {
    CHECK_THROWS_AS(parse_suite("[]"), SimError);
    CHECK_THROWS_AS(parse_suite(R"({"nope": 1})"), SimError);
    CHECK_THROWS_AS(parse_suite(R"({"tests": [{"assertions": [{"at": 0}]}]})"), SimError);
    CHECK_THROWS_AS(parse_suite(R"({"tests": [{"name": "t"}]})"), SimError);
    CHECK_THROWS_AS(parse_suite(R"({"tests": [{"name": "t", "assertions": []}]})"), SimError);
    CHECK_THROWS_AS(suite_of(R"({"tests": [
        {"name": "a", "assertions": [{"at": 0, "kind": "terminated", "value": false}]},
        {"name": "a", "assertions": [{"at": 0, "kind": "terminated", "value": false}]}]})"),
                    SimError);

    SECTION("script entries") {
        CHECK_THROWS_AS(single(R"({"name": "t", "script": [3],
            "assertions": [{"at": 0, "kind": "terminated", "value": false}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t", "script": [{"action": "NOOP", "repeat": 0}],
            "assertions": [{"at": 0, "kind": "terminated", "value": false}]})"),
                        SimError);
    }
    SECTION("assertion shapes") {
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"kind": "terminated", "value": false}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": "sometime", "kind": "terminated", "value": false}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": -2, "kind": "terminated", "value": false}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": 0, "kind": "vibes", "value": 1}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": 0, "kind": "terminated", "value": 3}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": 0, "kind": "var", "op": "=", "value": 1}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": 0, "kind": "var", "var": "x", "op": "~", "value": 1}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": 0, "kind": "var", "var": "x", "op": "="}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": 0, "kind": "shape", "shape": "blob"}]})"),
                        SimError);
        CHECK_THROWS_AS(single(R"({"name": "t",
            "assertions": [{"at": 0, "kind": "shape", "shape": "rect",
                            "color": "chartreuse"}]})"),
                        SimError);
    }
}

TEST_CASE("references into the program are prechecked to ERROR, not FAIL") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");

    auto expect_error = [&](const std::string& test_json, const std::string& needle) {
        TestResult r = run_test(p, single(test_json));
        INFO(r.message);
        CHECK(r.status == TestStatus::Error);
        CHECK(r.message.find(needle) != std::string::npos);
    };

    expect_error(R"({"name": "t", "setup": {"ghost": 1},
        "assertions": [{"at": 0, "kind": "terminated", "value": false}]})",
                 "unknown variable");
    expect_error(R"({"name": "t", "script": ["JUMP"],
        "assertions": [{"at": 0, "kind": "terminated", "value": false}]})",
                 "unknown action");
    expect_error(R"({"name": "t",
        "assertions": [{"at": 0, "kind": "var", "var": "ghost", "value": 1}]})",
                 "unknown variable");
    expect_error(R"({"name": "t",
        "assertions": [{"at": 0, "kind": "var", "var": "paddle_x", "index": 2, "value": 1}]})",
                 "not a vector");
    expect_error(R"({"name": "t",
        "assertions": [{"at": 0, "kind": "var", "var": "paddle_x", "value": "LEFTMOST"}]})",
                 "non-enum");
    expect_error(R"({"name": "t", "setup": {"paddle_x": "LEFTMOST"},
        "assertions": [{"at": 0, "kind": "terminated", "value": false}]})",
                 "non-enum");
    expect_error(R"({"name": "t", "script": ["NOOP"],
        "assertions": [{"at": 0, "kind": "step_reward", "value": 0}]})",
                 "step_reward");
    expect_error(R"({"name": "t",
        "assertions": [{"at": 0, "kind": "cumulative_reward", "op": "=",
                        "var_rhs": "ghost"}]})",
                 "unknown variable");
}

TEST_CASE("a scripted catch plays out exactly") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");
    SystemTest t = single(R"({
        "name": "catch_overhead_fruit",
        "setup": {"paddle_x": 3, "fruit_x": 3, "fruit_y": 6},
        "script": [{"action": "NOOP", "repeat": 2}],
        "assertions": [
            {"at": 1, "kind": "var", "var": "fruit_y", "value": 7},
            {"at": 1, "kind": "step_reward", "value": 0},
            {"at": 2, "kind": "var", "var": "hit", "value": true},
            {"at": 2, "kind": "var", "var": "fruit_y", "value": 0},
            {"at": 2, "kind": "step_reward", "value": 1},
            {"at": 2, "kind": "cumulative_reward", "value": 1},
            {"at": "end", "kind": "cumulative_reward", "value": 1},
            {"at": "end", "kind": "terminated", "value": false},
            {"at": 0, "kind": "var", "var": "paddle_x", "op": "=", "var_rhs": "fruit_x"}
        ]})");
    TestResult r = run_test(p, t);
    INFO(r.message);
    CHECK(r.status == TestStatus::Pass);
}

TEST_CASE("setup overrides are clamped and typed") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");
    SystemTest t = single(R"({
        "name": "clamped_setup",
        "setup": {"paddle_x": 99, "hit": true, "score": 2.5},
        "assertions": [
            {"at": 0, "kind": "var", "var": "paddle_x", "value": 7},
            {"at": 0, "kind": "var", "var": "hit", "value": 1},
            {"at": 0, "kind": "var", "var": "score", "value": 2.5}
        ]})");
    TestResult r = run_test(p, t);
    INFO(r.message);
    CHECK(r.status == TestStatus::Pass);
}

TEST_CASE("a terminating episode cuts the script short") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");

    SECTION("termination assertions observe it") {
        SystemTest t = single(R"({
            "name": "third_miss_ends_it",
            "setup": {"paddle_x": 0, "fruit_x": 5, "fruit_y": 7, "misses": 2},
            "script": [{"action": "NOOP", "repeat": 5}],
            "assertions": [
                {"at": 1, "kind": "terminated", "value": true},
                {"at": 1, "kind": "step_reward", "value": -1},
                {"at": "end", "kind": "var", "var": "misses", "value": 3}
            ]})");
        TestResult r = run_test(p, t);
        INFO(r.message);
        CHECK(r.status == TestStatus::Pass);
    }
    SECTION("an assertion beyond the end fails with the step count") {
        SystemTest t = single(R"({
            "name": "expects_a_longer_run",
            "setup": {"paddle_x": 0, "fruit_x": 5, "fruit_y": 7, "misses": 2},
            "script": [{"action": "NOOP", "repeat": 5}],
            "assertions": [{"at": 3, "kind": "var", "var": "misses", "value": 3}]})");
        TestResult r = run_test(p, t);
        CHECK(r.status == TestStatus::Fail);
        CHECK(r.message.find("episode ended after 1 steps") != std::string::npos);
        CHECK_FALSE(r.trace.empty());
    }
}

TEST_CASE("shape assertions see the rendered scene") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");
    SECTION("present and absent primitives") {
        SystemTest t = single(R"({
            "name": "scene_layout",
            "assertions": [
                {"at": 0, "kind": "shape", "shape": "rect", "color": "blue"},
                {"at": 0, "kind": "shape", "shape": "circle", "color": "red"},
                {"at": 0, "kind": "shape", "shape": "circle"},
                {"at": 0, "kind": "shape", "shape": "text", "present": false},
                {"at": 0, "kind": "shape", "shape": "circle", "color": "yellow",
                 "present": false}
            ]})");
        TestResult r = run_test(p, t);
        INFO(r.message);
        CHECK(r.status == TestStatus::Pass);
    }
    SECTION("a wrong color is a failure with context") {
        SystemTest t = single(R"({
            "name": "wants_a_yellow_circle",
            "assertions": [{"at": 0, "kind": "shape", "shape": "circle",
                            "color": "yellow"}]})");
        TestResult r = run_test(p, t);
        CHECK(r.status == TestStatus::Fail);
        CHECK(r.message.find("circle") != std::string::npos);
    }
}

TEST_CASE("failure messages carry a short trailing trace") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");
    SystemTest t = single(R"({
        "name": "wrong_expectation",
        "setup": {"paddle_x": 3, "fruit_x": 3, "fruit_y": 6},
        "script": [{"action": "NOOP", "repeat": 2}],
        "assertions": [{"at": 2, "kind": "var", "var": "hit", "value": false}]})");
    TestResult r = run_test(p, t);
    REQUIRE(r.status == TestStatus::Fail);
    CHECK(r.message.find("hit = 1") != std::string::npos);
    REQUIRE_FALSE(r.trace.empty());
    CHECK(r.trace.back().find("hit=1") != std::string::npos);
}

TEST_CASE("the shipped reference programs pass their suites completely") {
    for (const char* name : {"catcher", "pong"}) {
        FactoredPOMDP p = load_program(std::string("fixtures/programs/") + name + ".fsim");
        std::vector<SystemTest> tests =
            load_suite(testpath::repo(std::string("fixtures/suites/") + name + ".suite.json"));
        SuiteReport report = run_suite(p, tests);
        INFO(name << ": " << render_report_text(report));
        CHECK_FALSE(report.suite_error);
        CHECK(report.failed == 0);
        CHECK(report.errors == 0);
        CHECK(report.pass_rate() == 1.0);
    }
}

TEST_CASE("every seeded defect is caught by at least one named test") {
    std::vector<SystemTest> tests =
        load_suite(testpath::repo("fixtures/suites/catcher.suite.json"));
    for (const char* name :
         {"catcher-steer-inverted", "catcher-paddle-sticky", "catcher-fall-two-rows",
          "catcher-double-score", "catcher-miss-free", "catcher-paddle-red"}) {
        FactoredPOMDP mutant =
            load_program(std::string("fixtures/mutants/") + name + ".fsim");
        SuiteReport report = run_suite(mutant, tests);
        INFO(name << ": " << render_report_text(report));
        CHECK_FALSE(report.suite_error);
        CHECK(report.errors == 0);
        CHECK(report.failed >= 1);
        CHECK(report.pass_rate() < 1.0);
        bool some_named_failure = false;
        for (const auto& r : report.results)
            if (r.status == TestStatus::Fail && !r.name.empty() && !r.message.empty())
                some_named_failure = true;
        CHECK(some_named_failure);
    }
}

TEST_CASE("suite reports are deterministic and sorted by test name") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");
    std::vector<SystemTest> tests =
        load_suite(testpath::repo("fixtures/suites/catcher.suite.json"));

    SuiteReport a = run_suite(p, tests);
    SuiteReport b = run_suite(p, tests);
    CHECK(report_to_json(a).dump(2) == report_to_json(b).dump(2));
    CHECK(render_report_text(a) == render_report_text(b));
    for (std::size_t i = 1; i < a.results.size(); ++i)
        CHECK(a.results[i - 1].name < a.results[i].name);
}

TEST_CASE("an empty suite is a suite-level error") {
    FactoredPOMDP p = load_program("fixtures/programs/catcher.fsim");
    SuiteReport report = run_suite(p, {});
    CHECK(report.suite_error);
    CHECK(report.pass_rate() == 0.0);
    nlohmann::ordered_json j = report_to_json(report);
    CHECK(j.contains("suite_error"));
    CHECK(render_report_text(report).find("suite ERROR") != std::string::npos);
}
