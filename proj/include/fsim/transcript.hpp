#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "fsim/pipeline.hpp"
#include "fsim/validate.hpp"

namespace fsim {

inline nlohmann::ordered_json diag_to_json(const Diagnostic& d) {
    nlohmann::ordered_json j;
    j["severity"] = d.severity == Severity::Error ? "error" : "warning";
    j["code"] = to_string(d.code);
    j["message"] = d.message;
    j["line"] = d.span.line;
    j["col"] = d.span.col;
    return j;
}

inline nlohmann::ordered_json exchange_to_json(const Exchange& e) {
    nlohmann::ordered_json j;
    j["purpose"] = e.purpose;
    j["request"]["model"] = e.request.model;
    j["request"]["temperature"] = e.request.temperature;
    j["request"]["max_tokens"] = e.request.max_tokens;
    j["request"]["messages"] = messages_to_json(e.request.messages);
    j["response"]["text"] = e.response.text;
    j["response"]["prompt_tokens"] = e.response.prompt_tokens;
    j["response"]["completion_tokens"] = e.response.completion_tokens;
    return j;
}

inline nlohmann::ordered_json transcript_to_json(const Transcript& t) {
    nlohmann::ordered_json j;
    j["spec_text"] = t.spec_text;
    j["candidates"] = nlohmann::ordered_json::array();
    for (const auto& cand : t.candidates) {
        nlohmann::ordered_json cj;
        cj["plan"]["actions"] = cand.plan.actions;
        cj["plan"]["steps"] = cand.plan.steps;
        cj["plan_exchanges"] = nlohmann::ordered_json::array();
        for (const auto& e : cand.plan_exchanges) cj["plan_exchanges"].push_back(exchange_to_json(e));
        cj["steps"] = nlohmann::ordered_json::array();
        for (const auto& s : cand.steps) {
            nlohmann::ordered_json sj;
            sj["step_text"] = s.step_text;
            sj["program_before"] = s.program_before;
            sj["z"] = s.z_ids;
            sj["new_variables"] = s.new_variable_decls;
            sj["retrieved_factors"] = s.retrieved_factor_ids;
            sj["exchanges"] = nlohmann::ordered_json::array();
            for (const auto& e : s.exchanges) sj["exchanges"].push_back(exchange_to_json(e));
            sj["attempts"] = nlohmann::ordered_json::array();
            for (const auto& a : s.attempts) {
                nlohmann::ordered_json aj;
                aj["attempt"] = a.attempt;
                aj["phase"] = a.phase;
                aj["patch_text"] = a.patch_text;
                aj["diagnostics"] = nlohmann::ordered_json::array();
                for (const auto& d : a.diags) aj["diagnostics"].push_back(diag_to_json(d));
                aj["accepted"] = a.accepted;
                sj["attempts"].push_back(std::move(aj));
            }
            sj["accepted_patches"] = nlohmann::ordered_json::array();
            for (const auto& pd : s.accepted_patches)
                sj["accepted_patches"].push_back(patch_doc_to_json(pd));
            sj["program_after"] = s.program_after;
            cj["steps"].push_back(std::move(sj));
        }
        cj["final_source"] = cand.final_source;
        cj["complete"] = cand.complete;
        cj["failure"] = cand.failure;
        cj["repair_count"] = cand.repair_count;
        j["candidates"].push_back(std::move(cj));
    }
    j["chosen"] = t.chosen;
    j["prompt_tokens"] = t.prompt_tokens;
    j["completion_tokens"] = t.completion_tokens;
    j["complete"] = t.complete;
    j["failure"] = t.failure;
    return j;
}

// All exchanges in call order, so a recorded run can be replayed from its
// transcript alone.
inline std::vector<const Exchange*> all_exchanges(const Transcript& t) {
    std::vector<const Exchange*> out;
    for (const auto& cand : t.candidates) {
        for (const auto& e : cand.plan_exchanges) out.push_back(&e);
        for (const auto& s : cand.steps)
            for (const auto& e : s.exchanges) out.push_back(&e);
    }
    return out;
}

inline Cassette cassette_from_transcript(const Transcript& t) {
    Cassette c;
    for (const Exchange* e : all_exchanges(t))
        c.records.push_back({request_fingerprint(e->request), e->response.text,
                             e->response.prompt_tokens, e->response.completion_tokens});
    return c;
}

inline bool token_totals_consistent(const Transcript& t) {
    long long prompt = 0, completion = 0;
    for (const Exchange* e : all_exchanges(t)) {
        prompt += e->response.prompt_tokens;
        completion += e->response.completion_tokens;
    }
    return prompt == t.prompt_tokens && completion == t.completion_tokens;
}

// Context boundedness: a step's outgoing prompts may quote factor sources
// only for that step's retrieved factors. Returns one line per violation.
inline std::vector<std::string> context_boundedness_violations(const Transcript& t) {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < t.candidates.size(); ++c) {
        const auto& cand = t.candidates[c];
        for (std::size_t si = 0; si < cand.steps.size(); ++si) {
            const auto& step = cand.steps[si];
            ValidateResult vr = validate_source(step.program_before);
            if (!vr.ok()) continue;
            for (const auto& f : vr.pomdp.factors) {
                bool retrieved = false;
                for (const auto& id : step.retrieved_factor_ids)
                    if (id == f.id) { retrieved = true; break; }
                if (retrieved) continue;
                std::string source = format_factor(f);
                for (const auto& e : step.exchanges) {
                    for (const auto& m : e.request.messages) {
                        if (m.role == "assistant") continue;
                        if (m.content.find(source) != std::string::npos)
                            out.push_back("candidate " + std::to_string(c) + " step " +
                                          std::to_string(si) + ": prompt '" + e.purpose +
                                          "' contains source of factor '" + f.id + "'");
                    }
                }
            }
        }
    }
    return out;
}

}  // namespace fsim
