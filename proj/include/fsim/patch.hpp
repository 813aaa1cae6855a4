#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "fsim/diag.hpp"
#include "fsim/format.hpp"
#include "fsim/ir.hpp"
#include "fsim/parse.hpp"
#include "fsim/validate.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Patch interchange document:
//   {"new_variables": ["var fruit_y : real[0, 63] init 0", ...],
//    "factors": [{"id", "kind", "scope", "targets", "body_source", "replace"}]}
// Variables travel as var-declaration source lines; factor bodies as bare
// statement blocks. The validator is the sole gatekeeper before a patch
// touches a program.

struct PatchFactorDoc {
    std::string id;
    FactorKind kind = FactorKind::Model;
    std::vector<std::string> scope;
    std::vector<std::string> targets;
    bool has_targets = false;
    std::string body_source;
    bool replace = false;
};

struct PatchDoc {
    std::vector<std::string> new_variables;
    std::vector<PatchFactorDoc> factors;
};

inline bool parse_factor_kind(const std::string& s, FactorKind& out) {
    if (s == "controller") out = FactorKind::Controller;
    else if (s == "model") out = FactorKind::Model;
    else if (s == "reward") out = FactorKind::Reward;
    else if (s == "view") out = FactorKind::View;
    else return false;
    return true;
}

inline PatchDoc patch_doc_from_json(const std::string& text, std::vector<Diagnostic>& diags) {
    PatchDoc doc;
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        diags.push_back({Severity::Error, DiagCode::SchemaError,
                         "patch is not a JSON object", {}});
        return doc;
    }
    if (j.contains("new_variables")) {
        if (!j["new_variables"].is_array()) {
            diags.push_back({Severity::Error, DiagCode::SchemaError,
                             "new_variables must be an array of declaration strings", {}});
        } else {
            for (const auto& v : j["new_variables"]) {
                if (!v.is_string()) {
                    diags.push_back({Severity::Error, DiagCode::SchemaError,
                                     "new_variables entries must be strings", {}});
                    continue;
                }
                doc.new_variables.push_back(v.get<std::string>());
            }
        }
    }
    if (j.contains("factors")) {
        if (!j["factors"].is_array()) {
            diags.push_back(
                {Severity::Error, DiagCode::SchemaError, "factors must be an array", {}});
        } else {
            for (const auto& f : j["factors"]) {
                if (!f.is_object()) {
                    diags.push_back({Severity::Error, DiagCode::SchemaError,
                                     "factor entries must be objects", {}});
                    continue;
                }
                PatchFactorDoc fd;
                if (!f.contains("id") || !f["id"].is_string() || f["id"].get<std::string>().empty()) {
                    diags.push_back({Severity::Error, DiagCode::SchemaError,
                                     "factor entry is missing a string id", {}});
                    continue;
                }
                fd.id = f["id"].get<std::string>();
                std::string kind = f.value("kind", std::string());
                if (!parse_factor_kind(kind, fd.kind)) {
                    diags.push_back({Severity::Error, DiagCode::SchemaError,
                                     "factor '" + fd.id + "' has unknown kind '" + kind + "'",
                                     {}});
                    continue;
                }
                auto read_list = [&](const char* key, std::vector<std::string>& out) {
                    if (!f.contains(key)) return false;
                    if (!f[key].is_array()) {
                        diags.push_back({Severity::Error, DiagCode::SchemaError,
                                         "factor '" + fd.id + "' field '" + key +
                                             "' must be an array of variable ids",
                                         {}});
                        return false;
                    }
                    for (const auto& s : f[key]) {
                        if (s.is_string()) out.push_back(s.get<std::string>());
                    }
                    return true;
                };
                read_list("scope", fd.scope);
                fd.has_targets = read_list("targets", fd.targets);
                if (!f.contains("body_source") || !f["body_source"].is_string()) {
                    diags.push_back({Severity::Error, DiagCode::SchemaError,
                                     "factor '" + fd.id + "' is missing body_source", {}});
                    continue;
                }
                fd.body_source = f["body_source"].get<std::string>();
                fd.replace = f.value("replace", false);
                doc.factors.push_back(std::move(fd));
            }
        }
    }
    return doc;
}

inline nlohmann::ordered_json patch_doc_to_json(const PatchDoc& doc) {
    nlohmann::ordered_json j;
    j["new_variables"] = doc.new_variables;
    j["factors"] = nlohmann::ordered_json::array();
    for (const auto& f : doc.factors) {
        nlohmann::ordered_json fj;
        fj["id"] = f.id;
        fj["kind"] = to_string(f.kind);
        fj["scope"] = f.scope;
        fj["targets"] = f.targets;
        fj["body_source"] = f.body_source;
        fj["replace"] = f.replace;
        j["factors"].push_back(std::move(fj));
    }
    return j;
}

// Document form of a checked patch, for transcripts.
inline PatchDoc patch_doc_of(const Patch& patch) {
    PatchDoc doc;
    for (const auto& v : patch.new_variables) {
        std::string line = format_variable(v);
        if (!line.empty() && line.back() == '\n') line.pop_back();
        doc.new_variables.push_back(std::move(line));
    }
    for (const auto& pf : patch.factors) {
        PatchFactorDoc fd;
        fd.id = pf.factor.id;
        fd.kind = pf.factor.kind;
        fd.scope = pf.factor.scope.variable_ids;
        fd.targets = pf.factor.targets.variable_ids;
        fd.has_targets = !fd.targets.empty();
        fd.body_source = format_statements(pf.factor.body);
        fd.replace = pf.replace;
        doc.factors.push_back(std::move(fd));
    }
    return doc;
}

struct PatchResult {
    Patch patch;
    std::vector<Diagnostic> diags;
    bool ok() const { return !has_errors(diags); }
};

// Checks a patch document against a base program: variable declarations
// parse and are fresh, factor bodies parse, and the patched program obeys
// every integrity rule. Returns the full list of violations.
inline PatchResult validate_patch(const FactoredPOMDP& base, const PatchDoc& doc) {
    PatchResult result;
    auto& diags = result.diags;

    FactoredPOMDP scratch = base;
    for (const auto& decl : doc.new_variables) {
        ParseResult pr = parse(decl);
        bool shape_ok = pr.ok() && pr.program.vars.size() == 1 && pr.program.factors.empty() &&
                        !pr.program.has_actions && !pr.program.has_score &&
                        !pr.program.has_max_steps;
        if (!shape_ok) {
            for (const auto& d : pr.diags) diags.push_back(d);
            diags.push_back({Severity::Error, DiagCode::InvalidVariableProposal,
                             "not a single variable declaration: " + decl, {}});
            continue;
        }
        const ast::VarDecl& vd = pr.program.vars[0];
        if (detail::is_reserved_word(vd.id)) {
            diags.push_back({Severity::Error, DiagCode::ReservedWord,
                             "variable id '" + vd.id + "' is a reserved word", {}});
            continue;
        }
        if (variable_index(scratch, vd.id) >= 0) {
            diags.push_back({Severity::Error, DiagCode::DuplicateId,
                             "variable id '" + vd.id + "' already declared", {}});
            continue;
        }
        StateVariable v;
        v.id = vd.id;
        v.name = vd.label.empty() ? vd.id : vd.label;
        v.domain = vd.domain;
        std::vector<Diagnostic> init_diags;
        v.init = detail::resolve_init(vd, init_diags);
        check_init(v, init_diags);
        if (has_errors(init_diags)) {
            for (auto& d : init_diags) {
                d.code = DiagCode::InvalidVariableProposal;
                diags.push_back(d);
            }
            continue;
        }
        scratch.variables.push_back(v);
        result.patch.new_variables.push_back(std::move(v));
    }
    scratch.score_index = variable_index(scratch, scratch.score_id);

    detail::EnumTable enums = detail::EnumTable::build(scratch);

    FactoredPOMDP merged = scratch;
    std::vector<std::string> patch_ids;
    for (const auto& fd : doc.factors) {
        for (const auto& seen : patch_ids)
            if (seen == fd.id)
                diags.push_back({Severity::Error, DiagCode::DuplicateId,
                                 "factor id '" + fd.id + "' appears twice in the patch", {}});
        patch_ids.push_back(fd.id);

        StatementsResult body = parse_statements(fd.body_source);
        for (const auto& d : body.diags) diags.push_back(d);

        ast::FactorDraft draft;
        draft.id = fd.id;
        draft.kind = fd.kind;
        draft.scope = fd.scope;
        draft.targets = fd.targets;
        draft.has_targets = fd.has_targets;
        draft.body = std::move(body.block);
        Factor factor = detail::resolve_factor(scratch, enums, draft, diags);

        bool exists = find_factor(base, fd.id) != nullptr;
        if (exists && !fd.replace)
            diags.push_back({Severity::Error, DiagCode::DuplicateId,
                             "factor id '" + fd.id + "' already declared (set replace)", {}});

        bool replaced = false;
        for (auto& existing : merged.factors) {
            if (existing.id != factor.id) continue;
            factor.order_index = existing.kind == factor.kind
                                     ? existing.order_index
                                     : next_order_index(merged, factor.kind);
            existing = factor;
            replaced = true;
            break;
        }
        if (!replaced) {
            factor.order_index = next_order_index(merged, factor.kind);
            merged.factors.push_back(factor);
        }
        result.patch.factors.push_back({std::move(factor), fd.replace});
    }
    sort_evaluation_order(merged.factors);

    for (const auto& d : check_pomdp(merged)) diags.push_back(d);

    if (!result.ok()) result.patch = Patch{};
    return result;
}

}  // namespace fsim
