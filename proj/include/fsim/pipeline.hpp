#pragma once

#include <cctype>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fsim/diag.hpp"
#include "fsim/format.hpp"
#include "fsim/ir.hpp"
#include "fsim/patch.hpp"
#include "fsim/prompts.hpp"
#include "fsim/provider.hpp"
#include "fsim/validate.hpp"

namespace fsim {

struct SynthConfig {
    int n_plans = 1;       // >1 keeps the candidate whose synthesis needed the fewest repairs
    int max_attempts = 3;  // per-phase validation attempts before StepFailed
    double temperature = 0.0;
    int max_tokens = 2048;
    std::string model;
    std::string program_name = "untitled";
};

struct Plan {
    std::vector<std::string> steps;
    std::vector<std::string> actions;
};

struct StepContext {
    std::string step_text;
    ScopeSet z;
    std::vector<StateVariable> new_variables;
    std::vector<Factor> retrieved_factors;
};

struct Exchange {
    std::string purpose;
    ProviderRequest request;
    ProviderResponse response;
};

struct AttemptRecord {
    int attempt = 1;
    std::string phase;
    std::string patch_text;
    std::vector<Diagnostic> diags;
    bool accepted = false;
};

struct StepRecord {
    std::string step_text;
    std::string program_before;
    std::vector<std::string> z_ids;
    std::vector<std::string> new_variable_decls;
    std::vector<std::string> retrieved_factor_ids;
    std::vector<Exchange> exchanges;
    std::vector<AttemptRecord> attempts;
    std::vector<PatchDoc> accepted_patches;
    std::string program_after;
};

struct CandidateRecord {
    Plan plan;
    std::vector<Exchange> plan_exchanges;
    std::vector<StepRecord> steps;
    std::string final_source;
    bool complete = false;
    std::string failure;
    int repair_count = 0;
};

struct Transcript {
    std::string spec_text;
    std::vector<CandidateRecord> candidates;
    int chosen = -1;
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    bool complete = false;
    std::string failure;

    const CandidateRecord& chosen_candidate() const { return candidates.at(chosen); }
};

struct SynthResult {
    bool ok = false;
    FactoredPOMDP program;
    Transcript transcript;
    DiagCode error_code = DiagCode::StepFailed;
    std::string error;
};

// --- response text utilities ------------------------------------------------

inline std::string strip_code_fence(const std::string& text) {
    std::size_t begin = 0, end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    std::string t = text.substr(begin, end - begin);
    if (t.rfind("```", 0) == 0) {
        std::size_t nl = t.find('\n');
        std::size_t close = t.rfind("```");
        if (nl != std::string::npos && close != std::string::npos && close > nl) {
            t = t.substr(nl + 1, close - nl - 1);
            std::size_t b = 0, e = t.size();
            while (b < e && std::isspace(static_cast<unsigned char>(t[b]))) ++b;
            while (e > b && std::isspace(static_cast<unsigned char>(t[e - 1]))) --e;
            t = t.substr(b, e - b);
        }
    }
    return t;
}

// Plan responses carry an ACTIONS line plus a numbered step list:
//   ACTIONS: LEFT RIGHT
//   1. First step
//   2. Second step
inline bool parse_plan_text(const std::string& text, Plan& out, std::string& error) {
    out = Plan{};
    std::istringstream in(strip_code_fence(text));
    std::string line;
    while (std::getline(in, line)) {
        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::string trimmed = line.substr(i);
        while (!trimmed.empty() && std::isspace(static_cast<unsigned char>(trimmed.back())))
            trimmed.pop_back();
        if (trimmed.empty()) continue;
        if (trimmed.rfind("ACTIONS:", 0) == 0) {
            std::istringstream toks(trimmed.substr(8));
            std::string tok;
            while (toks >> tok) out.actions.push_back(tok);
            continue;
        }
        std::size_t d = 0;
        while (d < trimmed.size() && std::isdigit(static_cast<unsigned char>(trimmed[d]))) ++d;
        if (d == 0 || d >= trimmed.size() || (trimmed[d] != '.' && trimmed[d] != ')')) continue;
        std::size_t s = d + 1;
        while (s < trimmed.size() && std::isspace(static_cast<unsigned char>(trimmed[s]))) ++s;
        if (s < trimmed.size()) out.steps.push_back(trimmed.substr(s));
    }
    if (out.actions.empty()) {
        error = "missing ACTIONS: line naming the action tokens";
        return false;
    }
    if (out.steps.empty()) {
        error = "no numbered plan steps found";
        return false;
    }
    return true;
}

// --- synthesis --------------------------------------------------------------

enum class Phase { Controller, Model, View };

inline const char* phase_name(Phase p) {
    switch (p) {
        case Phase::Controller: return "gen_controller";
        case Phase::Model: return "gen_model";
        case Phase::View: return "gen_view";
    }
    return "?";
}

struct PhaseDraft {
    Phase phase = Phase::Controller;
    std::vector<Message> messages;  // conversation so far, ending with the draft's prompt
    std::string response_text;      // latest raw response
};

class Synthesizer {
  public:
    Synthesizer(Provider& provider, PromptSet prompts, SynthConfig config)
        : provider_(provider), prompts_(std::move(prompts)), config_(std::move(config)) {}

    // Algorithm: plan from the spec text, then per step select context and
    // generate controller, model, and view patches, each applied through the
    // bounded repair loop.
    SynthResult run(const std::string& spec_text) {
        SynthResult result;
        result.transcript.spec_text = spec_text;
        transcript_ = &result.transcript;

        if (spec_text.empty()) {
            result.error_code = DiagCode::EmptySpec;
            result.error = "specification text is empty";
            result.transcript.failure = result.error;
            transcript_ = nullptr;
            return result;
        }

        int n = config_.n_plans < 1 ? 1 : config_.n_plans;
        for (int c = 0; c < n; ++c) {
            transcript_->candidates.emplace_back();
            candidate_ = &transcript_->candidates.back();
            try {
                run_candidate(spec_text);
            } catch (const SimError& e) {
                candidate_->failure = std::string(to_string(e.code())) + ": " + e.what();
                if (n == 1) {
                    result.error_code = e.code() == DiagCode::EmptySpec ||
                                                e.code() == DiagCode::UnparsablePlan ||
                                                e.code() == DiagCode::CassetteExhausted ||
                                                e.code() == DiagCode::ReplayMismatch ||
                                                e.code() == DiagCode::ProviderTransport ||
                                                e.code() == DiagCode::InvalidVariableProposal
                                            ? e.code()
                                            : DiagCode::StepFailed;
                    result.error = candidate_->failure;
                }
            }
            candidate_ = nullptr;
        }

        int best = -1;
        for (int c = 0; c < n; ++c) {
            const auto& cand = transcript_->candidates[c];
            if (!cand.complete) continue;
            if (best < 0 || cand.repair_count < transcript_->candidates[best].repair_count)
                best = c;
        }
        transcript_->chosen = best < 0 ? 0 : best;
        if (best >= 0) {
            const auto& cand = transcript_->candidates[best];
            ValidateResult vr = validate_source(cand.final_source);
            result.ok = vr.ok();
            result.program = std::move(vr.pomdp);
            transcript_->complete = true;
        } else {
            transcript_->failure = transcript_->candidates[transcript_->chosen].failure;
            if (result.error.empty()) {
                result.error = transcript_->failure;
                result.error_code = DiagCode::StepFailed;
            }
        }
        transcript_ = nullptr;
        return result;
    }

    // --- individual phases, usable standalone in tests ---

    Plan decompose(const std::string& spec_text) {
        if (spec_text.empty())
            throw SimError(DiagCode::EmptySpec, "specification text is empty");
        std::vector<Message> messages = base_messages(
            render_template(prompts_.decompose, {{"spec_text", spec_text}}));
        ProviderResponse resp = call("decompose", messages, plan_sink());
        Plan plan;
        std::string error;
        if (parse_plan_text(resp.text, plan, error)) return plan;
        messages.push_back({"assistant", resp.text});
        messages.push_back(
            {"user", render_template(prompts_.decompose_retry, {{"format_error", error}})});
        resp = call("decompose_retry", messages, plan_sink());
        if (parse_plan_text(resp.text, plan, error)) return plan;
        throw SimError(DiagCode::UnparsablePlan, "plan unparsable after retry: " + error);
    }

    StepContext select_context(const FactoredPOMDP& p, const std::string& step_text) {
        std::map<std::string, std::string> bindings = {
            {"step_text", step_text},
            {"variables", variable_decls(p)},
            {"actions", action_line(p)},
            {"score", p.score_id}};
        std::vector<Message> messages =
            base_messages(render_template(prompts_.select_context, bindings));
        ProviderResponse resp = call("select_context", messages, step_sink());

        std::vector<Diagnostic> diags;
        StepContext ctx;
        if (try_parse_context(p, step_text, resp.text, ctx, diags)) return ctx;

        messages.push_back({"assistant", resp.text});
        messages.push_back({"user", render_template(prompts_.select_context_retry,
                                                    {{"diagnostics", render_all(diags)}})});
        resp = call("select_context_retry", messages, step_sink());
        diags.clear();
        if (try_parse_context(p, step_text, resp.text, ctx, diags)) return ctx;
        throw SimError(DiagCode::InvalidVariableProposal,
                       "context selection failed after retry:\n" + render_all(diags));
    }

    PhaseDraft gen_phase(Phase phase, const FactoredPOMDP& p, const StepContext& ctx) {
        const std::string& tmpl = phase == Phase::Controller  ? prompts_.gen_controller
                                  : phase == Phase::Model     ? prompts_.gen_model
                                                              : prompts_.gen_view;
        std::map<std::string, std::string> bindings = {
            {"step_text", ctx.step_text},
            {"variables", context_variable_decls(p, ctx)},
            {"factors", retrieved_sources(ctx)},
            {"actions", action_line(p)},
            {"score", p.score_id}};
        PhaseDraft draft;
        draft.phase = phase;
        draft.messages = base_messages(render_template(tmpl, bindings));
        ProviderResponse resp = call(phase_name(phase), draft.messages, step_sink());
        draft.response_text = resp.text;
        return draft;
    }

    PhaseDraft gen_controller(const FactoredPOMDP& p, const StepContext& ctx) {
        return gen_phase(Phase::Controller, p, ctx);
    }
    PhaseDraft gen_model(const FactoredPOMDP& p, const StepContext& ctx) {
        return gen_phase(Phase::Model, p, ctx);
    }
    PhaseDraft gen_view(const FactoredPOMDP& p, const StepContext& ctx) {
        return gen_phase(Phase::View, p, ctx);
    }

    // Validates the drafted patch; on failure feeds the diagnostics back and
    // regenerates, up to max_attempts total, then throws StepFailed.
    FactoredPOMDP apply_with_repair(const FactoredPOMDP& p, PhaseDraft draft,
                                    const StepContext& ctx, int max_attempts) {
        (void)ctx;
        for (int attempt = 1;; ++attempt) {
            std::vector<Diagnostic> diags;
            PatchResult checked = check_draft(p, draft, diags);

            AttemptRecord rec;
            rec.attempt = attempt;
            rec.phase = phase_name(draft.phase);
            rec.patch_text = draft.response_text;
            rec.diags = diags;
            rec.accepted = !has_errors(diags);
            if (step_record_) step_record_->attempts.push_back(rec);
            if (candidate_ && !rec.accepted) ++candidate_->repair_count;

            if (rec.accepted) {
                if (step_record_)
                    step_record_->accepted_patches.push_back(patch_doc_of(checked.patch));
                return apply_structural_edit(p, checked.patch);
            }
            if (attempt >= max_attempts)
                throw SimError(DiagCode::StepFailed,
                               std::string(phase_name(draft.phase)) + " failed after " +
                                   std::to_string(attempt) + " attempts:\n" +
                                   render_all(diags));
            draft.messages.push_back({"assistant", draft.response_text});
            draft.messages.push_back({"user", render_template(prompts_.repair,
                                                              {{"diagnostics",
                                                                render_all(diags)}})});
            ProviderResponse resp = call(std::string(phase_name(draft.phase)) + "_repair",
                                         draft.messages, step_sink());
            draft.response_text = resp.text;
        }
    }

    const SynthConfig& config() const { return config_; }

  private:
    void run_candidate(const std::string& spec_text) {
        candidate_->plan = decompose(spec_text);
        FactoredPOMDP p = initial_pomdp(candidate_->plan.actions, config_.program_name);

        for (const auto& step_text : candidate_->plan.steps) {
            candidate_->steps.emplace_back();
            step_record_ = &candidate_->steps.back();
            step_record_->step_text = step_text;
            step_record_->program_before = format(p);
            try {
                StepContext ctx = select_context(p, step_text);
                if (!ctx.new_variables.empty()) {
                    Patch vars_patch;
                    vars_patch.new_variables = ctx.new_variables;
                    p = apply_structural_edit(p, vars_patch);
                }
                step_record_->z_ids = ctx.z.variable_ids;
                for (const auto& v : ctx.new_variables) {
                    std::string line = format_variable(v);
                    if (!line.empty() && line.back() == '\n') line.pop_back();
                    step_record_->new_variable_decls.push_back(line);
                }
                for (const auto& f : ctx.retrieved_factors)
                    step_record_->retrieved_factor_ids.push_back(f.id);

                p = apply_with_repair(p, gen_controller(p, ctx), ctx, config_.max_attempts);
                p = apply_with_repair(p, gen_model(p, ctx), ctx, config_.max_attempts);
                p = apply_with_repair(p, gen_view(p, ctx), ctx, config_.max_attempts);
                step_record_->program_after = format(p);
                step_record_ = nullptr;
            } catch (...) {
                step_record_ = nullptr;
                throw;
            }
        }
        candidate_->final_source = format(p);
        candidate_->complete = true;
    }

    PatchResult check_draft(const FactoredPOMDP& p, const PhaseDraft& draft,
                            std::vector<Diagnostic>& diags) {
        std::string body = strip_code_fence(draft.response_text);
        PatchDoc doc = patch_doc_from_json(body, diags);
        if (has_errors(diags)) return {};
        if (!doc.new_variables.empty())
            diags.push_back({Severity::Error, DiagCode::SchemaError,
                             "patches may not introduce variables; variables are added "
                             "during context selection",
                             {}});
        for (const auto& f : doc.factors) {
            bool allowed = draft.phase == Phase::Controller
                               ? f.kind == FactorKind::Controller
                               : draft.phase == Phase::Model
                                     ? (f.kind == FactorKind::Model ||
                                        f.kind == FactorKind::Reward)
                                     : f.kind == FactorKind::View;
            if (!allowed)
                diags.push_back({Severity::Error, DiagCode::SchemaError,
                                 "factor '" + f.id + "' has kind " + to_string(f.kind) +
                                     ", not allowed in " + phase_name(draft.phase),
                                 {}});
        }
        if (has_errors(diags)) return {};
        PatchResult checked = validate_patch(p, doc);
        for (const auto& d : checked.diags) diags.push_back(d);
        return checked;
    }

    bool try_parse_context(const FactoredPOMDP& p, const std::string& step_text,
                           const std::string& response_text, StepContext& ctx,
                           std::vector<Diagnostic>& diags) {
        ctx = StepContext{};
        ctx.step_text = step_text;
        std::string body = strip_code_fence(response_text);
        nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            diags.push_back({Severity::Error, DiagCode::SchemaError,
                             "context selection must be a JSON object with new_variables "
                             "and relevant_variables arrays",
                             {}});
            return false;
        }
        PatchDoc doc;
        if (j.contains("new_variables") && j["new_variables"].is_array())
            for (const auto& v : j["new_variables"])
                if (v.is_string()) doc.new_variables.push_back(v.get<std::string>());
        PatchResult vars = validate_patch(p, doc);
        for (const auto& d : vars.diags) diags.push_back(d);
        if (!vars.ok()) return false;
        ctx.new_variables = vars.patch.new_variables;

        FactoredPOMDP after = p;
        if (!ctx.new_variables.empty()) {
            Patch vp;
            vp.new_variables = ctx.new_variables;
            after = apply_structural_edit(p, vp);
        }

        std::vector<std::string> ids;
        if (j.contains("relevant_variables") && j["relevant_variables"].is_array())
            for (const auto& v : j["relevant_variables"])
                if (v.is_string()) ids.push_back(v.get<std::string>());
        for (const auto& v : ctx.new_variables) ids.push_back(v.id);
        for (const auto& id : ids) {
            if (variable_index(after, id) < 0)
                diags.push_back({Severity::Error, DiagCode::UnknownVariable,
                                 "relevant_variables names undeclared variable '" + id + "'",
                                 {}});
        }
        if (has_errors(diags)) return false;
        ctx.z = ScopeSet::of(ids);
        ctx.retrieved_factors = scope_overlap_query(after, ctx.z);
        return true;
    }

    // --- prompt assembly ---

    std::vector<Message> base_messages(std::string user_content) const {
        return {{"system", prompts_.system}, {"user", std::move(user_content)}};
    }

    static std::string variable_decls(const FactoredPOMDP& p) {
        std::string out;
        for (const auto& v : p.variables) out += format_variable(v);
        return out;
    }

    static std::string context_variable_decls(const FactoredPOMDP& p, const StepContext& ctx) {
        std::string out;
        for (const auto& id : ctx.z.variable_ids) {
            int vi = variable_index(p, id);
            if (vi >= 0) out += format_variable(p.variables[vi]);
        }
        return out;
    }

    static std::string retrieved_sources(const StepContext& ctx) {
        std::string out;
        for (const auto& f : ctx.retrieved_factors) {
            out += format_factor(f);
            out += "\n";
        }
        return out;
    }

    static std::string action_line(const FactoredPOMDP& p) {
        std::string out;
        for (std::size_t i = 0; i < p.actions.size(); ++i) {
            if (i) out += " ";
            out += p.actions[i];
        }
        return out;
    }

    std::vector<Exchange>* plan_sink() {
        return candidate_ ? &candidate_->plan_exchanges : nullptr;
    }
    std::vector<Exchange>* step_sink() {
        if (step_record_) return &step_record_->exchanges;
        return plan_sink();
    }

    ProviderResponse call(const std::string& purpose, const std::vector<Message>& messages,
                          std::vector<Exchange>* sink) {
        ProviderRequest req;
        req.messages = messages;
        req.temperature = config_.temperature;
        req.max_tokens = config_.max_tokens;
        req.model = config_.model;
        ProviderResponse resp = provider_.complete(req);
        if (transcript_) {
            transcript_->prompt_tokens += resp.prompt_tokens;
            transcript_->completion_tokens += resp.completion_tokens;
        }
        if (sink) sink->push_back({purpose, req, resp});
        return resp;
    }

    Provider& provider_;
    PromptSet prompts_;
    SynthConfig config_;
    Transcript* transcript_ = nullptr;
    CandidateRecord* candidate_ = nullptr;
    StepRecord* step_record_ = nullptr;
};

// Convenience wrapper matching the one-shot entry point.
inline SynthResult synthesize(const std::string& spec_text, Provider& provider,
                              const PromptSet& prompts, const SynthConfig& config) {
    Synthesizer s(provider, prompts, config);
    return s.run(spec_text);
}

}  // namespace fsim
