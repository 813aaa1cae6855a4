// fsim: check, run, play, synth, test, train, eval, report.
// Exit codes: 0 ok, 1 usage, 2 validation, 3 synthesis failure,
// 4 test failures, 5 provider/transport.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "fsim/flatten.hpp"
#include "fsim/pipeline.hpp"
#include "fsim/play.hpp"
#include "fsim/prompts.hpp"
#include "fsim/provider.hpp"
#include "fsim/provider_http.hpp"
#include "fsim/rl.hpp"
#include "fsim/systest.hpp"
#include "fsim/trace.hpp"
#include "fsim/transcript.hpp"
#include "fsim/validate.hpp"

namespace fs = std::filesystem;
using namespace fsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitSynthesis = 3;
constexpr int kExitTestFailures = 4;
constexpr int kExitProvider = 5;

#ifndef FSIM_DEFAULT_PROMPTS_DIR
#define FSIM_DEFAULT_PROMPTS_DIR "prompts"
#endif

int exit_code_for(DiagCode code) {
    switch (code) {
        case DiagCode::ProviderTransport:
        case DiagCode::ReplayMismatch:
        case DiagCode::CassetteExhausted:
            return kExitProvider;
        case DiagCode::StepFailed:
        case DiagCode::UnparsablePlan:
        case DiagCode::InvalidVariableProposal:
            return kExitSynthesis;
        default:
            return kExitValidation;
    }
}

void write_file(const std::string& path, const std::string& content) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SimError(DiagCode::SchemaError, "cannot write file: " + path);
    out << content;
}

void print_diags(const std::string& path, const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) std::fprintf(stderr, "%s: %s\n", path.c_str(), d.render().c_str());
}

// Loads and validates a program file, printing diagnostics on failure.
bool load_program(const std::string& path, FactoredPOMDP& out) {
    std::string source;
    try {
        source = read_text_file(path);
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return false;
    }
    ValidateResult vr = validate_source(source);
    print_diags(path, vr.diags);
    if (!vr.ok()) return false;
    out = std::move(vr.pomdp);
    return true;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (!tok.empty()) seeds.push_back(std::stoull(tok));
    }
    return seeds;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

// --- subcommand state -------------------------------------------------------

struct CheckArgs {
    std::string program;
    bool json = false;
};

struct RunArgs {
    std::string program;
    std::uint64_t seed = 0;
    long long steps = -1;
    std::string script;
    bool random = false;
    std::string out;
};

struct PlayArgs {
    std::string program;
    std::uint64_t seed = 0;
    int fps = 15;
    int width = 64;
    int height = 64;
    std::string keys;
};

struct SynthArgs {
    std::vector<std::string> specs;
    std::string replay;
    bool lenient = false;
    bool live = false;
    std::string out_dir = "synth-out";
    std::string prompts_dir = FSIM_DEFAULT_PROMPTS_DIR;
    std::string name;
    std::string model;
    int plans = 1;
    int max_attempts = 3;
    double temperature = 0.0;
    int jobs = 1;
    std::string record;
};

struct TestArgs {
    std::string program;
    std::string suite;
    std::string json_out;
};

struct TrainArgs {
    std::vector<std::string> programs;
    std::uint64_t seed = 0;
    Hyperparams hp;
    long long filter_steps = 0;
    std::string out = "policy.json";
    std::string curve;
};

struct EvalArgs {
    std::string reference;
    std::string policy;
    std::string reference_policy;
    bool train_reference = false;
    std::uint64_t train_seed = 0;
    int episodes = 20;
    std::string seeds = "0,1,2";
    std::string json_out;
};

struct ReportArgs {
    std::vector<std::string> run_dirs;
    std::string suite;
    std::string json_out;
};

// --- subcommands --------------------------------------------------------------

int cmd_check(const CheckArgs& a) {
    std::string source;
    try {
        source = read_text_file(a.program);
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    }
    ValidateResult vr = validate_source(source);
    if (a.json) {
        nlohmann::ordered_json j;
        j["ok"] = vr.ok();
        j["diagnostics"] = nlohmann::ordered_json::array();
        for (const auto& d : vr.diags) j["diagnostics"].push_back(diag_to_json(d));
        std::printf("%s\n", j.dump(2).c_str());
    } else {
        print_diags(a.program, vr.diags);
        if (vr.ok())
            std::printf("%s: ok (%zu variables, %zu factors)\n", a.program.c_str(),
                        vr.pomdp.variables.size(), vr.pomdp.factors.size());
    }
    return vr.ok() ? kExitOk : kExitValidation;
}

int cmd_run(const RunArgs& a) {
    FactoredPOMDP p;
    if (!load_program(a.program, p)) return kExitValidation;

    EpisodeTrace trace;
    StreamRouter router(a.seed);
    auto [state, obs] = reset(p, a.seed, router, &trace.warnings);
    trace.initial_state = state;
    trace.initial_observation = obs;

    std::vector<std::string> script;
    if (!a.script.empty()) {
        std::istringstream in(a.script);
        std::string tok;
        while (std::getline(in, tok, ',')) {
            if (tok.empty()) continue;
            if (action_index(p, tok) < 0) {
                std::fprintf(stderr, "unknown action token '%s'\n", tok.c_str());
                return kExitValidation;
            }
            script.push_back(tok);
        }
    }
    Policy random = random_policy(p, a.seed);

    SimState cur = state;
    Observation cur_obs = obs;
    std::size_t script_pos = 0;
    while (!cur.terminated && cur.step_count < p.max_steps) {
        if (a.steps >= 0 && cur.step_count >= a.steps) break;
        std::string action;
        if (!script.empty()) {
            if (script_pos >= script.size()) break;
            action = script[script_pos++];
        } else if (a.random) {
            action = random(cur, cur_obs);
        } else {
            action = "NOOP";
        }
        StepResult r = step(p, cur, action, router, &trace.warnings);
        cur = r.state;
        cur_obs = r.observation;
        trace.cumulative_reward += r.reward;
        trace.steps.push_back({action, std::move(r)});
    }

    std::string doc = trace_to_json(p, trace).dump(2) + "\n";
    if (a.out.empty())
        std::fwrite(doc.data(), 1, doc.size(), stdout);
    else
        write_file(a.out, doc);
    std::fprintf(stderr, "%zu steps, cumulative reward %s\n", trace.steps.size(),
                 format_number(trace.cumulative_reward).c_str());
    return kExitOk;
}

int cmd_play(const PlayArgs& a) {
    FactoredPOMDP p;
    if (!load_program(a.program, p)) return kExitValidation;
    PlayConfig cfg;
    cfg.seed = a.seed;
    cfg.fps = a.fps;
    cfg.width = a.width;
    cfg.height = a.height;
    if (!a.keys.empty()) {
        std::istringstream in(a.keys);
        std::string pair;
        while (std::getline(in, pair, ',')) {
            auto eq = pair.find('=');
            if (eq != 1 || pair.size() < 3) {
                std::fprintf(stderr, "bad --keys entry '%s' (want k=ACTION)\n", pair.c_str());
                return kExitUsage;
            }
            std::string action = pair.substr(2);
            if (action_index(p, action) < 0) {
                std::fprintf(stderr, "unknown action token '%s'\n", action.c_str());
                return kExitValidation;
            }
            cfg.keymap[pair[0]] = action;
        }
    }
    return play(p, cfg);
}

int synth_one(const SynthArgs& a, const std::string& spec_path, const std::string& out_dir) {
    std::string spec_text;
    try {
        spec_text = read_text_file(spec_path);
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    }

    std::unique_ptr<Provider> provider;
    std::unique_ptr<RecordingProvider> recorder;
    try {
        if (!a.replay.empty()) {
            std::string cassette_path = a.replay;
            if (fs::is_directory(a.replay))
                cassette_path = (fs::path(a.replay) / (stem_of(spec_path) + ".cassette.json"))
                                    .string();
            provider = std::make_unique<ReplayProvider>(Cassette::load(cassette_path),
                                                        !a.lenient);
        } else {
            provider = std::make_unique<HttpProvider>(HttpProviderConfig::from_env());
        }
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return exit_code_for(e.code());
    }

    Provider* active = provider.get();
    if (!a.record.empty()) {
        recorder = std::make_unique<RecordingProvider>(*provider);
        active = recorder.get();
    }

    SynthConfig cfg;
    cfg.n_plans = a.plans;
    cfg.max_attempts = a.max_attempts;
    cfg.temperature = a.temperature;
    cfg.model = a.model;
    cfg.program_name = a.name.empty() ? stem_of(spec_path) : a.name;

    PromptSet prompts;
    try {
        prompts = load_prompts(a.prompts_dir);
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    }

    SynthResult result;
    try {
        result = synthesize(spec_text, *active, prompts, cfg);
    } catch (const SimError& e) {
        std::fprintf(stderr, "synthesis failed: %s\n", e.what());
        return exit_code_for(e.code());
    }

    write_file((fs::path(out_dir) / "transcript.json").string(),
               transcript_to_json(result.transcript).dump(2) + "\n");
    if (result.ok)
        write_file((fs::path(out_dir) / "program.fsim").string(),
                   result.transcript.chosen_candidate().final_source);
    if (!a.record.empty()) recorder->cassette().save(a.record);
    {
        auto now = std::chrono::system_clock::now().time_since_epoch();
        nlohmann::ordered_json meta;
        meta["written_at_unix_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
        meta["spec"] = spec_path;
        write_file((fs::path(out_dir) / "meta.json").string(), meta.dump(2) + "\n");
    }

    if (!result.ok) {
        std::fprintf(stderr, "synthesis failed: %s\n", result.error.c_str());
        return exit_code_for(result.error_code);
    }
    std::printf("%s: program with %zu variables, %zu factors -> %s\n", spec_path.c_str(),
                result.program.variables.size(), result.program.factors.size(),
                (fs::path(out_dir) / "program.fsim").string().c_str());
    std::printf("tokens: %lld prompt, %lld completion\n", result.transcript.prompt_tokens,
                result.transcript.completion_tokens);
    return kExitOk;
}

int cmd_synth(const SynthArgs& a) {
    if (!a.live && a.replay.empty()) {
        std::fprintf(stderr, "synth needs exactly one of --replay or --live\n");
        return kExitUsage;
    }
    if (a.live && !a.replay.empty()) {
        std::fprintf(stderr, "--replay and --live are mutually exclusive\n");
        return kExitUsage;
    }
    if (a.specs.size() > 1 && !a.replay.empty() && !fs::is_directory(a.replay)) {
        std::fprintf(stderr, "with several specs --replay must name a directory of "
                             "<stem>.cassette.json files\n");
        return kExitUsage;
    }

    if (a.specs.size() == 1)
        return synth_one(a, a.specs[0], a.out_dir);

    std::vector<int> codes(a.specs.size(), kExitOk);
    std::atomic<std::size_t> next{0};
    int jobs = std::max(1, a.jobs);
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= a.specs.size()) return;
                std::string out_dir =
                    (fs::path(a.out_dir) / stem_of(a.specs[i])).string();
                codes[i] = synth_one(a, a.specs[i], out_dir);
            }
        });
    }
    for (auto& t : workers) t.join();
    int worst = kExitOk;
    for (int c : codes) worst = std::max(worst, c);
    return worst;
}

int cmd_test(const TestArgs& a) {
    FactoredPOMDP p;
    if (!load_program(a.program, p)) return kExitValidation;
    std::vector<SystemTest> tests;
    try {
        tests = load_suite(a.suite);
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    }
    SuiteReport report = run_suite(p, tests);
    std::printf("%s", render_report_text(report).c_str());
    if (!a.json_out.empty()) write_file(a.json_out, report_to_json(report).dump(2) + "\n");
    if (report.suite_error) return kExitValidation;
    return report.failed == 0 && report.errors == 0 ? kExitOk : kExitTestFailures;
}

int cmd_train(const TrainArgs& a) {
    std::vector<FactoredPOMDP> programs;
    for (const auto& path : a.programs) {
        FactoredPOMDP p;
        if (!load_program(path, p)) return kExitValidation;
        programs.push_back(std::move(p));
    }
    if (a.filter_steps > 0) {
        FilterResult fr = filter_envs(programs, {a.seed}, a.filter_steps);
        for (const auto& [idx, error] : fr.rejected)
            std::fprintf(stderr, "filtered out %s: %s\n", a.programs[idx].c_str(),
                         error.c_str());
        std::vector<FactoredPOMDP> kept;
        for (std::size_t idx : fr.kept) kept.push_back(std::move(programs[idx]));
        programs = std::move(kept);
        if (programs.empty()) {
            std::fprintf(stderr, "no programs survive filtering\n");
            return kExitValidation;
        }
    }
    TrainResult tr;
    try {
        tr = train(programs, a.hp, a.seed);
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    }
    write_file(a.out, policy_to_json(tr.policy).dump(2) + "\n");
    if (!a.curve.empty()) write_file(a.curve, train_curve_csv(tr));
    std::printf("trained on %zu programs for %lld steps: %zu observation rows -> %s\n",
                programs.size(), a.hp.total_steps, tr.policy.q.size(), a.out.c_str());
    return kExitOk;
}

int cmd_eval(const EvalArgs& a) {
    FactoredPOMDP reference;
    if (!load_program(a.reference, reference)) return kExitValidation;
    TabularPolicy policy, ref_policy;
    try {
        policy = policy_from_json(nlohmann::json::parse(read_text_file(a.policy)));
        if (!a.reference_policy.empty()) {
            ref_policy = policy_from_json(
                nlohmann::json::parse(read_text_file(a.reference_policy)));
        } else if (a.train_reference) {
            ref_policy = train({reference}, policy.hp, a.train_seed).policy;
        } else {
            std::fprintf(stderr, "eval needs --reference-policy FILE or --train-reference\n");
            return kExitUsage;
        }
    } catch (const SimError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "bad policy file: %s\n", e.what());
        return kExitValidation;
    }
    TransferReport report =
        evaluate_zero_shot(policy, reference, ref_policy, a.episodes, parse_seed_list(a.seeds));
    std::printf("%s", render_transfer_report(report).c_str());
    if (!a.json_out.empty())
        write_file(a.json_out, transfer_report_to_json(report).dump(2) + "\n");
    return report.degenerate ? kExitValidation : kExitOk;
}

int cmd_report(const ReportArgs& a) {
    std::vector<SystemTest> tests;
    if (!a.suite.empty()) {
        try {
            tests = load_suite(a.suite);
        } catch (const SimError& e) {
            std::fprintf(stderr, "%s\n", e.what());
            return kExitValidation;
        }
    }
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    std::printf("%-20s %-9s %10s %12s %10s\n", "run", "complete", "tokens_in", "tokens_out",
                "pass_rate");
    for (const auto& dir : a.run_dirs) {
        nlohmann::ordered_json row;
        row["run"] = stem_of(dir);
        std::string transcript_path = (fs::path(dir) / "transcript.json").string();
        long long prompt = 0, completion = 0;
        bool complete = false;
        try {
            nlohmann::json t = nlohmann::json::parse(read_text_file(transcript_path));
            prompt = t.value("prompt_tokens", 0LL);
            completion = t.value("completion_tokens", 0LL);
            complete = t.value("complete", false);
        } catch (...) {
            std::fprintf(stderr, "cannot read %s\n", transcript_path.c_str());
        }
        row["complete"] = complete;
        row["prompt_tokens"] = prompt;
        row["completion_tokens"] = completion;
        std::string pass_rate = "-";
        if (!tests.empty()) {
            FactoredPOMDP p;
            std::string program_path = (fs::path(dir) / "program.fsim").string();
            if (fs::exists(program_path) && load_program(program_path, p)) {
                SuiteReport sr = run_suite(p, tests);
                row["pass_rate"] = sr.pass_rate();
                pass_rate = format_number(sr.pass_rate());
            }
        }
        std::printf("%-20s %-9s %10lld %12lld %10s\n", row["run"].get<std::string>().c_str(),
                    complete ? "yes" : "no", prompt, completion, pass_rate.c_str());
        rows.push_back(std::move(row));
    }
    if (!a.json_out.empty()) {
        nlohmann::ordered_json j;
        j["runs"] = rows;
        write_file(a.json_out, j.dump(2) + "\n");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"factored-simulation toolkit"};
    app.require_subcommand(1);

    CheckArgs check_args;
    auto* check = app.add_subcommand("check", "parse and validate a program");
    check->add_option("program", check_args.program, "program file")->required();
    check->add_flag("--json", check_args.json, "emit diagnostics as JSON");

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "execute one episode and dump the trace");
    run->add_option("program", run_args.program, "program file")->required();
    run->add_option("--seed", run_args.seed, "episode seed");
    run->add_option("--steps", run_args.steps, "step cap");
    run->add_option("--script", run_args.script, "comma-separated action tokens");
    run->add_flag("--random", run_args.random, "random policy");
    run->add_option("--out", run_args.out, "trace output file (default: stdout)");

    PlayArgs play_args;
    auto* playc = app.add_subcommand("play", "interactive terminal session");
    playc->add_option("program", play_args.program, "program file")->required();
    playc->add_option("--seed", play_args.seed, "episode seed");
    playc->add_option("--fps", play_args.fps, "ticks per second");
    playc->add_option("--width", play_args.width, "raster width");
    playc->add_option("--height", play_args.height, "raster height");
    playc->add_option("--keys", play_args.keys, "key bindings, e.g. a=LEFT,d=RIGHT");

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "synthesize programs from spec text");
    synth->add_option("specs", synth_args.specs, "specification text files")->required();
    synth->add_option("--replay", synth_args.replay, "cassette file (or directory)");
    synth->add_flag("--lenient", synth_args.lenient, "match cassette records by order only");
    synth->add_flag("--live", synth_args.live, "use the HTTP provider from env vars");
    synth->add_option("--record", synth_args.record, "record exchanges to a cassette file");
    synth->add_option("--out-dir", synth_args.out_dir, "output directory");
    synth->add_option("--prompts", synth_args.prompts_dir, "prompt template directory");
    synth->add_option("--name", synth_args.name, "program name");
    synth->add_option("--model", synth_args.model, "provider model name");
    synth->add_option("--plans", synth_args.plans, "plan samples");
    synth->add_option("--max-attempts", synth_args.max_attempts, "repair attempts per phase");
    synth->add_option("--temperature", synth_args.temperature, "sampling temperature");
    synth->add_option("--jobs", synth_args.jobs, "concurrent synthesis jobs");

    TestArgs test_args;
    auto* test = app.add_subcommand("test", "run a system-test suite");
    test->add_option("program", test_args.program, "program file")->required();
    test->add_option("suite", test_args.suite, "suite JSON file")->required();
    test->add_option("--json", test_args.json_out, "write the report as JSON");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a tabular agent");
    train->add_option("programs", train_args.programs, "program files")->required();
    train->add_option("--seed", train_args.seed, "training seed");
    train->add_option("--steps", train_args.hp.total_steps, "total environment steps");
    train->add_option("--alpha", train_args.hp.alpha, "learning rate");
    train->add_option("--gamma", train_args.hp.gamma, "training discount");
    train->add_option("--eps-start", train_args.hp.eps_start, "initial exploration");
    train->add_option("--eps-end", train_args.hp.eps_end, "final exploration");
    train->add_option("--bins", train_args.hp.bins, "bins per numeric variable");
    train->add_option("--filter", train_args.filter_steps,
                      "random-policy filter step budget (0 = off)");
    train->add_option("--out", train_args.out, "policy output file");
    train->add_option("--curve", train_args.curve, "training-curve CSV file");

    EvalArgs eval_args;
    auto* evalc = app.add_subcommand("eval", "zero-shot evaluation against a reference");
    evalc->add_option("reference", eval_args.reference, "reference program")->required();
    evalc->add_option("--policy", eval_args.policy, "policy file")->required();
    evalc->add_option("--reference-policy", eval_args.reference_policy,
                      "reference-trained policy file");
    evalc->add_flag("--train-reference", eval_args.train_reference,
                    "train the reference baseline now");
    evalc->add_option("--train-seed", eval_args.train_seed, "seed for --train-reference");
    evalc->add_option("--episodes", eval_args.episodes, "episodes per seed");
    evalc->add_option("--seeds", eval_args.seeds, "comma-separated seeds");
    evalc->add_option("--json", eval_args.json_out, "write the report as JSON");

    ReportArgs report_args;
    auto* report = app.add_subcommand("report", "aggregate synthesis runs");
    report->add_option("runs", report_args.run_dirs, "synthesis output directories")
        ->required();
    report->add_option("--suite", report_args.suite, "suite applied to every program");
    report->add_option("--json", report_args.json_out, "write the table as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (check->parsed()) return cmd_check(check_args);
        if (run->parsed()) return cmd_run(run_args);
        if (playc->parsed()) return cmd_play(play_args);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (test->parsed()) return cmd_test(test_args);
        if (train->parsed()) return cmd_train(train_args);
        if (evalc->parsed()) return cmd_eval(eval_args);
        if (report->parsed()) return cmd_report(report_args);
    } catch (const SimError& e) {
        std::fprintf(stderr, "error[%s]: %s\n", to_string(e.code()), e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    }
    return kExitUsage;
}
