// Drives the installed binary end to end through a shell, checking exit codes,
// stream separation, and the files each subcommand leaves behind.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "catch2/catch_amalgamated.hpp"
#include "json.hpp"

#include "support/paths.hpp"

#ifndef FSIM_CLI_PATH
#error "FSIM_CLI_PATH must point at the command-line binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using fsim::testpath::repo;
using fsim::testpath::slurp;

namespace {

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("fsim-cli-" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    ++counter;
    fs::path out = work_dir() / ("stdout." + std::to_string(counter));
    fs::path err = work_dir() / ("stderr." + std::to_string(counter));
    std::string cmd = std::string("'") + FSIM_CLI_PATH + "' " + args + " >'" + out.string() +
                      "' 2>'" + err.string() + "'";
    int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out.string());
    r.err = slurp(err.string());
    return r;
}

std::string write_temp(const std::string& name, const std::string& text) {
    fs::path p = work_dir() / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
}

std::string q(const std::string& path) { return "'" + path + "'"; }

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("check accepts the shipped programs") {
    auto r = run_cli("check " + q(repo("fixtures/programs/catcher.fsim")));
    CHECK(r.code == 0);
    CHECK(contains(r.out, "ok (8 variables, 5 factors)"));

    r = run_cli("check " + q(repo("fixtures/programs/corridor.fsim")));
    CHECK(r.code == 0);
    CHECK(contains(r.out, "ok (3 variables, 3 factors)"));

    r = run_cli("check --json " + q(repo("fixtures/programs/pong.fsim")));
    REQUIRE(r.code == 0);
    json j = json::parse(r.out);
    CHECK(j["ok"] == true);
    CHECK(j["diagnostics"].empty());
}

TEST_CASE("check rejects broken input with structured diagnostics") {
    std::string bad = write_temp("broken.fsim",
                                 "name \"broken\"\n"
                                 "actions GO\n"
                                 "score score\n"
                                 "var score : real[-10, 10] init 0\n"
                                 "model leak {\n"
                                 "  scope score\n"
                                 "  targets score\n"
                                 "  score := other\n"
                                 "}\n");
    auto r = run_cli("check " + q(bad));
    CHECK(r.code == 2);

    r = run_cli("check --json " + q(bad));
    REQUIRE(r.code == 2);
    json j = json::parse(r.out);
    CHECK(j["ok"] == false);
    REQUIRE_FALSE(j["diagnostics"].empty());
    CHECK(j["diagnostics"][0]["severity"] == "error");
    CHECK(contains(r.out, "other"));

    r = run_cli("check " + q((work_dir() / "no-such-file.fsim").string()));
    CHECK(r.code == 2);
    CHECK_FALSE(r.err.empty());
}

TEST_CASE("bad invocations are usage errors") {
    auto r = run_cli("");
    CHECK(r.code == 1);
    r = run_cli("check --bogus " + q(repo("fixtures/programs/catcher.fsim")));
    CHECK(r.code == 1);
}

TEST_CASE("run emits the same trace for the same seed") {
    std::string args =
        "run " + q(repo("fixtures/programs/catcher.fsim")) + " --seed 7 --steps 25 --random";
    auto a = run_cli(args);
    auto b = run_cli(args);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);

    json j = json::parse(a.out);
    REQUIRE(j.contains("steps"));
    REQUIRE_FALSE(j["steps"].empty());
    CHECK(j["steps"].size() <= 25);
    for (const auto& step : j["steps"]) {
        CHECK(step.contains("action"));
        CHECK(step.contains("reward"));
        CHECK(step.contains("done"));
        CHECK(step.contains("state"));
        CHECK(step.contains("shapes"));
    }
    CHECK(j.contains("cumulative_reward"));
    CHECK(contains(a.err, "steps, cumulative reward"));

    auto c = run_cli("run " + q(repo("fixtures/programs/catcher.fsim")) +
                     " --seed 8 --steps 25 --random");
    REQUIRE(c.code == 0);
    CHECK(a.out != c.out);
}

TEST_CASE("run follows a script and can write the trace to a file") {
    fs::path out = work_dir() / "corridor-trace.json";
    auto r = run_cli("run " + q(repo("fixtures/programs/corridor.fsim")) +
                     " --script RIGHT,RIGHT,LEFT --out " + q(out.string()));
    REQUIRE(r.code == 0);
    CHECK(r.out.empty());
    CHECK(contains(r.err, "3 steps"));

    json j = json::parse(slurp(out.string()));
    CHECK(j["initial_state"]["x"] == 1.0);
    CHECK(j["initial_state"]["score"] == 0.0);
    REQUIRE(j["steps"].size() == 3);
    CHECK(j["steps"][0]["action"] == "RIGHT");
    CHECK(j["steps"][0]["state"]["x"] == 2.0);
    CHECK(j["steps"][1]["state"]["x"] == 3.0);
    CHECK(j["steps"][2]["action"] == "LEFT");
    CHECK(j["steps"][2]["state"]["x"] == 2.0);
    for (const auto& step : j["steps"]) {
        CHECK(step["reward"] == -1.0);
        CHECK(step["done"] == false);
    }
    CHECK(j["cumulative_reward"] == -3.0);
}

TEST_CASE("run rejects a script with an unknown action") {
    auto r = run_cli("run " + q(repo("fixtures/programs/corridor.fsim")) +
                     " --script RIGHT,JUMP");
    CHECK(r.code == 2);
    CHECK(contains(r.err, "JUMP"));
}

TEST_CASE("synth replays a cassette reproducibly") {
    fs::path d1 = work_dir() / "synth-a";
    fs::path d2 = work_dir() / "synth-b";
    std::string base = "synth " + q(repo("fixtures/specs/catcher.txt")) + " --replay " +
                       q(repo("fixtures/cassettes/catcher.cassette.json")) +
                       " --name catcher --out-dir ";
    auto a = run_cli(base + q(d1.string()));
    REQUIRE(a.code == 0);
    CHECK(contains(a.out, "8 variables, 5 factors"));
    CHECK(contains(a.out, "tokens:"));
    REQUIRE(fs::exists(d1 / "program.fsim"));
    REQUIRE(fs::exists(d1 / "transcript.json"));
    CHECK(fs::exists(d1 / "meta.json"));

    auto b = run_cli(base + q(d2.string()));
    REQUIRE(b.code == 0);
    CHECK(slurp((d1 / "program.fsim").string()) == slurp((d2 / "program.fsim").string()));
    CHECK(slurp((d1 / "transcript.json").string()) ==
          slurp((d2 / "transcript.json").string()));

    json t = json::parse(slurp((d1 / "transcript.json").string()));
    CHECK(t["complete"] == true);
    CHECK(t["prompt_tokens"].get<long long>() > 0);

    auto chk = run_cli("check " + q((d1 / "program.fsim").string()));
    CHECK(chk.code == 0);
    auto suite = run_cli("test " + q((d1 / "program.fsim").string()) + " " +
                         q(repo("fixtures/suites/catcher.suite.json")));
    CHECK(suite.code == 0);
}

TEST_CASE("synth needs exactly one provider source") {
    fs::path d = work_dir() / "synth-usage";
    auto r = run_cli("synth " + q(repo("fixtures/specs/catcher.txt")) + " --out-dir " +
                     q(d.string()));
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());

    r = run_cli("synth " + q(repo("fixtures/specs/catcher.txt")) + " --live --replay " +
                q(repo("fixtures/cassettes/catcher.cassette.json")) + " --out-dir " +
                q(d.string()));
    CHECK(r.code == 1);
}

TEST_CASE("synth maps replay faults to the provider exit code") {
    fs::path d = work_dir() / "synth-mismatch";
    auto r = run_cli("synth " + q(repo("fixtures/specs/pong.txt")) + " --replay " +
                     q(repo("fixtures/cassettes/catcher.cassette.json")) + " --name pong" +
                     " --out-dir " + q(d.string()));
    CHECK(r.code == 5);
    CHECK(contains(r.err, "synthesis failed"));

    json cassette =
        json::parse(slurp(repo("fixtures/cassettes/catcher.cassette.json")));
    json records = json::array();
    for (int i = 0; i < 3; ++i) records.push_back(cassette["records"][i]);
    cassette["records"] = records;
    std::string truncated = write_temp("truncated.cassette.json", cassette.dump(2) + "\n");

    fs::path d2 = work_dir() / "synth-exhausted";
    r = run_cli("synth " + q(repo("fixtures/specs/catcher.txt")) + " --replay " +
                q(truncated) + " --name catcher --out-dir " + q(d2.string()));
    CHECK(r.code == 5);
}

TEST_CASE("synth under a lenient replay ignores prompt drift") {
    fs::path d = work_dir() / "synth-lenient";
    auto r = run_cli("synth " + q(repo("fixtures/specs/pong.txt")) + " --replay " +
                     q(repo("fixtures/cassettes/catcher.cassette.json")) +
                     " --name pong --lenient --out-dir " + q(d.string()));
    REQUIRE(r.code == 0);
    CHECK(fs::exists(d / "program.fsim"));
}

TEST_CASE("synth reports an exhausted repair budget and keeps the transcript") {
    fs::path d = work_dir() / "synth-failed";
    auto r = run_cli("synth " + q(repo("fixtures/specs/mini.txt")) + " --replay " +
                     q(repo("fixtures/cassettes/repair-exhausts.cassette.json")) +
                     " --name mini --out-dir " + q(d.string()));
    CHECK(r.code == 3);
    CHECK(contains(r.err, "synthesis failed"));
    REQUIRE(fs::exists(d / "transcript.json"));
    CHECK_FALSE(fs::exists(d / "program.fsim"));
    json t = json::parse(slurp((d / "transcript.json").string()));
    CHECK(t["complete"] == false);
}

TEST_CASE("synth resolves per-spec cassettes from a directory") {
    fs::path d = work_dir() / "synth-multi";
    auto r = run_cli("synth " + q(repo("fixtures/specs/catcher.txt")) + " " +
                     q(repo("fixtures/specs/pong.txt")) + " --replay " +
                     q(repo("fixtures/cassettes")) + " --jobs 2 --out-dir " + q(d.string()));
    REQUIRE(r.code == 0);
    CHECK(fs::exists(d / "catcher" / "program.fsim"));
    CHECK(fs::exists(d / "pong" / "program.fsim"));

    auto multi = run_cli("synth " + q(repo("fixtures/specs/catcher.txt")) + " " +
                         q(repo("fixtures/specs/pong.txt")) + " --replay " +
                         q(repo("fixtures/cassettes/catcher.cassette.json")) + " --out-dir " +
                         q((work_dir() / "synth-multi-file").string()));
    CHECK(multi.code == 1);
}

TEST_CASE("test exits by suite outcome and can dump the report") {
    auto r = run_cli("test " + q(repo("fixtures/programs/catcher.fsim")) + " " +
                     q(repo("fixtures/suites/catcher.suite.json")));
    CHECK(r.code == 0);
    CHECK(contains(r.out, "PASS"));

    fs::path out = work_dir() / "mutant-report.json";
    r = run_cli("test " + q(repo("fixtures/mutants/catcher-steer-inverted.fsim")) + " " +
                q(repo("fixtures/suites/catcher.suite.json")) + " --json " + q(out.string()));
    CHECK(r.code == 4);
    CHECK(contains(r.out, "FAIL"));
    json j = json::parse(slurp(out.string()));
    CHECK(j["failed"].get<int>() >= 1);
    CHECK(j["pass_rate"].get<double>() < 1.0);

    r = run_cli("test " + q(repo("fixtures/programs/catcher.fsim")) + " " +
                q((work_dir() / "no-suite.json").string()));
    CHECK(r.code == 2);
}

TEST_CASE("train writes a policy that eval scores against a reference") {
    fs::path pol = work_dir() / "corridor-policy.json";
    auto r = run_cli("train " + q(repo("fixtures/programs/corridor.fsim")) +
                     " --steps 30000 --seed 3 --out " + q(pol.string()));
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "trained on 1 programs"));
    json pj = json::parse(slurp(pol.string()));
    CHECK(pj["actions"].size() == 3);

    fs::path rep = work_dir() / "transfer.json";
    r = run_cli("eval " + q(repo("fixtures/programs/corridor.fsim")) + " --policy " +
                q(pol.string()) + " --reference-policy " + q(pol.string()) +
                " --episodes 3 --seeds 0,1,2 --json " + q(rep.string()));
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "normalized"));
    json j = json::parse(slurp(rep.string()));
    CHECK(j["degenerate"] == false);
    CHECK(j["normalized"].get<double>() == 1.0);

    r = run_cli("eval " + q(repo("fixtures/programs/corridor.fsim")) + " --policy " +
                q(pol.string()) + " --train-reference --train-seed 3 --episodes 3");
    CHECK(r.code == 0);

    r = run_cli("eval " + q(repo("fixtures/programs/corridor.fsim")) + " --policy " +
                q(pol.string()));
    CHECK(r.code == 1);
}

TEST_CASE("eval flags a rewardless reference as degenerate") {
    std::string flat = write_temp("flat.fsim",
                                  "name \"flat\"\n"
                                  "actions GO\n"
                                  "score score\n"
                                  "max_steps 5\n"
                                  "var score : real[-10, 10] init 0\n"
                                  "var x : int[0, 1] init 0\n"
                                  "controller idle {\n"
                                  "  scope x\n"
                                  "  targets x\n"
                                  "  x := x\n"
                                  "}\n");
    fs::path pol = work_dir() / "flat-policy.json";
    auto r = run_cli("train " + q(flat) + " --steps 500 --out " + q(pol.string()));
    REQUIRE(r.code == 0);
    r = run_cli("eval " + q(flat) + " --policy " + q(pol.string()) + " --reference-policy " +
                q(pol.string()) + " --episodes 2 --seeds 0,1");
    CHECK(r.code == 2);
    CHECK(contains(r.out, "degenerate"));
}

TEST_CASE("report tabulates synthesis runs against a suite") {
    fs::path d = work_dir() / "report-runs";
    auto r = run_cli("synth " + q(repo("fixtures/specs/catcher.txt")) + " " +
                     q(repo("fixtures/specs/pong.txt")) + " --replay " +
                     q(repo("fixtures/cassettes")) + " --out-dir " + q(d.string()));
    REQUIRE(r.code == 0);

    fs::path out = work_dir() / "report.json";
    r = run_cli("report " + q((d / "catcher").string()) + " " + q((d / "pong").string()) +
                " --suite " + q(repo("fixtures/suites/catcher.suite.json")) + " --json " +
                q(out.string()));
    REQUIRE(r.code == 0);
    CHECK(contains(r.out, "pass_rate"));

    json j = json::parse(slurp(out.string()));
    REQUIRE(j["runs"].size() == 2);
    CHECK(j["runs"][0]["run"] == "catcher");
    CHECK(j["runs"][0]["complete"] == true);
    CHECK(j["runs"][0]["prompt_tokens"].get<long long>() > 0);
    CHECK(j["runs"][0]["pass_rate"].get<double>() == 1.0);
    CHECK(j["runs"][1]["run"] == "pong");
    CHECK(j["runs"][1]["pass_rate"].get<double>() < 1.0);
}
