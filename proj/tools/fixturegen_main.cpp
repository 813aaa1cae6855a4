// Regenerates the replay cassettes under fixtures/cassettes/ by driving the
// synthesis pipeline with scripted responses and recording the exchanges.
// Run from the repository root (or pass it as argv[1]). Each golden cassette
// is sanity-checked right after recording: the replayed program must validate
// and pass its system-test suite.

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fsim/pipeline.hpp"
#include "fsim/prompts.hpp"
#include "fsim/provider.hpp"
#include "fsim/systest.hpp"
#include "fsim/transcript.hpp"

namespace fs = std::filesystem;
using namespace fsim;

namespace {

std::string g_root = ".";

std::string path(const std::string& rel) { return (fs::path(g_root) / rel).string(); }

[[noreturn]] void fail(const std::string& msg) {
    std::fprintf(stderr, "fixturegen: %s\n", msg.c_str());
    std::exit(1);
}

const char* kEmptyPatch = R"x({"factors": []})x";

// --- scripted responses ------------------------------------------------------

// The catcher family differs only in the landing test, the miss price, and
// the fall rule; everything else is shared.
std::vector<std::string> catcher_script(const std::string& hit_cond,
                                        const std::string& miss_cond,
                                        const std::string& miss_price,
                                        const std::string& miss_cap,
                                        const std::string& fall_body) {
    std::vector<std::string> r;
    r.push_back(
        "ACTIONS: LEFT RIGHT NOOP\n"
        "1. A paddle slides along the bottom row of an 8 by 8 grid.\n"
        "2. A fruit falls one row per step and respawns at the top of a random column "
        "after landing.\n"
        "3. Catches and misses change the score, and too many misses end the game.\n"
        "4. Draw the paddle and the fruit.\n");
    r.push_back(
        R"x({"new_variables": ["var paddle_x : int[0, 7] init 3"], "relevant_variables": []})x");
    r.push_back(
        R"x({"factors": [{"id": "steer", "kind": "controller", "scope": ["paddle_x"], "targets": ["paddle_x"], "body_source": "if action == LEFT { paddle_x := max(paddle_x - 1, 0) }\nif action == RIGHT { paddle_x := min(paddle_x + 1, 7) }", "replace": false}]})x");
    r.push_back(kEmptyPatch);
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"new_variables": ["var fruit_x : int[0, 7] init 2", "var fruit_y : int[0, 7] init 0", "var hit : bool init false", "var miss : bool init false"], "relevant_variables": ["paddle_x"]})x");
    r.push_back(kEmptyPatch);
    nlohmann::ordered_json fall = {
        {"id", "fall"},
        {"kind", "model"},
        {"scope", {"fruit_x", "fruit_y", "paddle_x"}},
        {"targets", {"fruit_x", "fruit_y", "hit", "miss"}},
        {"body_source", "if fruit_y == 7 {\n  hit := " + hit_cond + "\n  miss := " + miss_cond +
                            "\n  fruit_y := 0\n  fruit_x := uniform_int(0, 7)\n} else {\n"
                            "  hit := false\n  miss := false\n" + fall_body + "}"},
        {"replace", false}};
    r.push_back(nlohmann::ordered_json{{"factors", {fall}}}.dump());
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"new_variables": ["var misses : int[0, 3] init 0", "var terminated : bool init false"], "relevant_variables": ["hit", "miss"]})x");
    r.push_back(kEmptyPatch);
    nlohmann::ordered_json tally = {
        {"id", "tally"},
        {"kind", "model"},
        {"scope", {"miss", "misses"}},
        {"targets", {"misses", "terminated"}},
        {"body_source",
         "if miss { misses := min(misses + 1, 3) }\nterminated := misses >= " + miss_cap},
        {"replace", false}};
    nlohmann::ordered_json scoring = {
        {"id", "scoring"},
        {"kind", "reward"},
        {"scope", {"hit", "miss"}},
        {"body_source", "if hit { score += 1 }\nif miss { score += " + miss_price + " }"},
        {"replace", false}};
    r.push_back(nlohmann::ordered_json{{"factors", {tally, scoring}}}.dump());
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"new_variables": [], "relevant_variables": ["paddle_x", "fruit_x", "fruit_y"]})x");
    r.push_back(kEmptyPatch);
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"factors": [{"id": "scene", "kind": "view", "scope": ["paddle_x", "fruit_x", "fruit_y"], "targets": [], "body_source": "rect(paddle_x * 8, 60, 8, 4, blue)\ncircle(fruit_x * 8 + 4, fruit_y * 8 + 4, 3, red)", "replace": false}]})x");
    return r;
}

std::vector<std::string> pong_script() {
    std::vector<std::string> r;
    r.push_back(
        "ACTIONS: UP DOWN NOOP\n"
        "1. A paddle slides up and down the left wall of a 16 by 16 court.\n"
        "2. A ball flies diagonally one cell per step and bounces off the walls.\n"
        "3. A paddle touch on the left wall scores; a ball past the paddle ends the rally.\n"
        "4. Draw the paddle and the ball.\n");
    r.push_back(
        R"x({"new_variables": ["var paddle_y : int[0, 12] init 6"], "relevant_variables": []})x");
    r.push_back(
        R"x({"factors": [{"id": "steer", "kind": "controller", "scope": ["paddle_y"], "targets": ["paddle_y"], "body_source": "if action == UP { paddle_y := max(paddle_y - 1, 0) }\nif action == DOWN { paddle_y := min(paddle_y + 1, 12) }", "replace": false}]})x");
    r.push_back(kEmptyPatch);
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"new_variables": ["var ball_x : int[0, 15] init 8", "var ball_y : int[0, 15] init 4", "var vx : int[-1, 1] init -1", "var vy : int[-1, 1] init 1"], "relevant_variables": []})x");
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"factors": [{"id": "move", "kind": "model", "scope": ["ball_x", "ball_y", "vx", "vy"], "targets": ["ball_x", "ball_y", "vx", "vy"], "body_source": "ball_x := clamp(ball_x + vx, 0, 15)\nball_y := clamp(ball_y + vy, 0, 15)\nif ball_y == 0 { vy := 1 }\nif ball_y == 15 { vy := -1 }\nif ball_x == 15 { vx := -1 }\nif ball_x == 0 { vx := 1 }", "replace": false}]})x");
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"new_variables": ["var hit : bool init false", "var terminated : bool init false"], "relevant_variables": ["ball_x", "ball_y", "vx", "vy", "paddle_y"]})x");
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"factors": [{"id": "move", "kind": "model", "scope": ["ball_x", "ball_y", "vx", "vy", "paddle_y"], "targets": ["ball_x", "ball_y", "vx", "vy", "hit", "terminated"], "body_source": "hit := false\nball_x := clamp(ball_x + vx, 0, 15)\nball_y := clamp(ball_y + vy, 0, 15)\nif ball_y == 0 { vy := 1 }\nif ball_y == 15 { vy := -1 }\nif ball_x == 15 { vx := -1 }\nif ball_x == 0 {\n  if ball_y >= paddle_y and ball_y <= paddle_y + 3 {\n    vx := 1\n    hit := true\n  } else {\n    terminated := true\n  }\n}", "replace": true}, {"id": "rally", "kind": "reward", "scope": ["hit"], "body_source": "if hit { score += 1 }", "replace": false}, {"id": "dropped", "kind": "reward", "scope": ["terminated"], "body_source": "if terminated { score += -5 }", "replace": false}]})x");
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"new_variables": [], "relevant_variables": ["paddle_y", "ball_x", "ball_y"]})x");
    r.push_back(kEmptyPatch);
    r.push_back(kEmptyPatch);
    r.push_back(
        R"x({"factors": [{"id": "scene", "kind": "view", "scope": ["paddle_y", "ball_x", "ball_y"], "targets": [], "body_source": "rect(0, paddle_y * 4, 2, 16, green)\ncircle(ball_x * 4 + 2, ball_y * 4 + 2, 2, white)", "replace": false}]})x");
    return r;
}

const char* kMiniPlan = "ACTIONS: BUMP\n1. The BUMP action raises a saturating counter.\n";
const char* kMiniVars =
    R"x({"new_variables": ["var level : int[0, 3] init 0"], "relevant_variables": []})x";
const char* kRaiseNoScope =
    R"x({"factors": [{"id": "raise", "kind": "controller", "scope": [], "targets": ["level"], "body_source": "if action == BUMP { level := min(level + 1, 3) }", "replace": false}]})x";
const char* kRaiseNoTarget =
    R"x({"factors": [{"id": "raise", "kind": "controller", "scope": ["level"], "targets": [], "body_source": "if action == BUMP { level := min(level + 1, 3) }", "replace": false}]})x";
const char* kRaiseGood =
    R"x({"factors": [{"id": "raise", "kind": "controller", "scope": ["level"], "targets": ["level"], "body_source": "if action == BUMP { level := min(level + 1, 3) }", "replace": false}]})x";

// --- recording ----------------------------------------------------------------

SynthResult record(const std::string& spec_file, const std::string& program_name,
                   const std::vector<std::string>& responses,
                   const std::string& cassette_file) {
    std::string spec_text = read_text_file(path("fixtures/specs/" + spec_file));
    PromptSet prompts = load_prompts(path("prompts"));
    ScriptedProvider scripted(responses);
    RecordingProvider recorder(scripted);
    SynthConfig cfg;
    cfg.program_name = program_name;
    SynthResult result = synthesize(spec_text, recorder, prompts, cfg);
    if (recorder.cassette().records.size() != responses.size())
        fail(cassette_file + ": consumed " +
             std::to_string(recorder.cassette().records.size()) + " of " +
             std::to_string(responses.size()) + " scripted responses");
    recorder.cassette().save(path("fixtures/cassettes/" + cassette_file));
    std::printf("recorded %-32s %zu exchanges%s\n", cassette_file.c_str(),
                recorder.cassette().records.size(), result.ok ? "" : "  (failing run)");
    return result;
}

void check_suite(const SynthResult& result, const std::string& suite_file) {
    if (!result.ok) fail(suite_file + ": synthesis unexpectedly failed: " + result.error);
    SuiteReport report =
        run_suite(result.program, load_suite(path("fixtures/suites/" + suite_file)));
    if (report.failed != 0 || report.errors != 0 || report.suite_error)
        fail(suite_file + ": synthesized program does not pass its suite:\n" +
             render_report_text(report));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_root = argv[1];
    fs::create_directories(path("fixtures/cassettes"));

    SynthResult r = record("catcher.txt", "catcher",
                           catcher_script("fruit_x == paddle_x", "fruit_x != paddle_x", "-1",
                                          "3", "  fruit_y := fruit_y + 1\n"),
                           "catcher.cassette.json");
    check_suite(r, "catcher.suite.json");

    r = record("pong.txt", "pong", pong_script(), "pong.cassette.json");
    check_suite(r, "pong.suite.json");

    record("catcher-wide.txt", "catcher-wide",
           catcher_script("abs(fruit_x - paddle_x) <= 1", "abs(fruit_x - paddle_x) > 1", "-1",
                          "3", "  fruit_y := fruit_y + 1\n"),
           "catcher-wide.cassette.json");
    record("catcher-harsh.txt", "catcher-harsh",
           catcher_script("fruit_x == paddle_x", "fruit_x != paddle_x", "-2", "2",
                          "  fruit_y := fruit_y + 1\n"),
           "catcher-harsh.cassette.json");
    record("catcher-drift.txt", "catcher-drift",
           catcher_script("fruit_x == paddle_x", "fruit_x != paddle_x", "-1", "3",
                          "  fruit_y := fruit_y + 1\n  if bernoulli(0.25) { fruit_x := "
                          "clamp(fruit_x + 2 * uniform_int(0, 1) - 1, 0, 7) }\n"),
           "catcher-drift.cassette.json");

    {
        std::vector<std::string> responses = {kMiniPlan,      kMiniVars,  kRaiseNoScope,
                                              kRaiseNoTarget, kRaiseGood, kEmptyPatch,
                                              kEmptyPatch};
        SynthResult rr =
            record("mini.txt", "mini", responses, "repair-recovers.cassette.json");
        if (!rr.ok) fail("repair-recovers: synthesis unexpectedly failed: " + rr.error);
        const CandidateRecord& cand = rr.transcript.chosen_candidate();
        std::size_t attempts = cand.steps.at(0).attempts.size();
        if (attempts != 5 || cand.repair_count != 2)
            fail("repair-recovers: expected 5 attempts (3 controller, 1 model, 1 view) and "
                 "2 repairs, got " +
                 std::to_string(attempts) + " and " + std::to_string(cand.repair_count));
    }
    {
        std::vector<std::string> responses = {kMiniPlan, kMiniVars, kRaiseNoScope,
                                              kRaiseNoScope, kRaiseNoScope};
        SynthResult rr =
            record("mini.txt", "mini", responses, "repair-exhausts.cassette.json");
        if (rr.ok) fail("repair-exhausts: synthesis unexpectedly succeeded");
        if (rr.error_code != DiagCode::StepFailed)
            fail(std::string("repair-exhausts: expected StepFailed, got ") +
                 to_string(rr.error_code));
    }

    std::printf("all cassettes recorded\n");
    return 0;
}
