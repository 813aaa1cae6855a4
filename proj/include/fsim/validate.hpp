#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fsim/ast.hpp"
#include "fsim/diag.hpp"
#include "fsim/ir.hpp"
#include "fsim/parse.hpp"

namespace fsim {

struct ValidateResult {
    FactoredPOMDP pomdp;
    std::vector<Diagnostic> diags;
    bool ok() const { return !has_errors(diags); }
};

namespace detail {

inline bool is_reserved_word(const std::string& s) {
    static const std::set<std::string> words = {
        "action", "true",        "false",       "if",          "then",  "else",
        "let",    "in",          "not",         "and",         "or",    "clamp",
        "abs",    "min",         "max",         "bernoulli",   "uniform_int",
        "uniform_real",          "categorical", "uniform",     "rect",  "circle",
        "text",   "scope",       "targets",     "init",        "label"};
    return words.count(s) > 0;
}

// Enum labels usable as bare constants: label -> ordinal. A label declared in
// several enum domains stays usable only if every declaration agrees on the
// ordinal; otherwise it lands in `ambiguous`.
struct EnumTable {
    std::map<std::string, int> ordinal;
    std::set<std::string> ambiguous;

    static EnumTable build(const FactoredPOMDP& p) {
        EnumTable t;
        for (const auto& v : p.variables) {
            if (v.domain.kind != DomainKind::Enum) continue;
            for (std::size_t i = 0; i < v.domain.labels.size(); ++i) {
                const std::string& label = v.domain.labels[i];
                auto it = t.ordinal.find(label);
                if (it == t.ordinal.end()) {
                    t.ordinal[label] = static_cast<int>(i);
                } else if (it->second != static_cast<int>(i)) {
                    t.ambiguous.insert(label);
                }
            }
        }
        return t;
    }
};

// Walks parsed trees producing resolved copies: identifiers become Var /
// Local / ActionTok / EnumConst leaves with slot indices. Unresolvable names
// produce a diagnostic and a literal 0 so a single pass reports everything.
struct Resolver {
    const FactoredPOMDP& p;
    const EnumTable& enums;
    std::vector<Diagnostic>& diags;
    std::string factor_id;
    std::vector<std::pair<std::string, int>> locals;

    int local_lookup(const std::string& name) const {
        for (auto it = locals.rbegin(); it != locals.rend(); ++it)
            if (it->first == name) return it->second;
        return -1;
    }
    int push_local(const std::string& name) {
        int slot = static_cast<int>(locals.size());
        locals.emplace_back(name, slot);
        return slot;
    }
    void pop_to(std::size_t mark) { locals.resize(mark); }

    void error(DiagCode code, const std::string& msg, Span span) {
        diags.push_back({Severity::Error, code, "factor '" + factor_id + "': " + msg, span});
    }

    ExprPtr expr(const ExprPtr& e) {
        if (!e) return nullptr;
        auto out = std::make_shared<Expr>(*e);
        switch (e->kind) {
            case Expr::Kind::Ident: {
                int slot = local_lookup(e->name);
                if (slot >= 0) {
                    out->kind = Expr::Kind::Local;
                    out->index = slot;
                    break;
                }
                int vi = variable_index(p, e->name);
                if (vi >= 0) {
                    if (p.variables[vi].domain.kind == DomainKind::Vec) {
                        error(DiagCode::InvalidDomain,
                              "vector variable '" + e->name + "' must be read element-wise",
                              e->span);
                        out->kind = Expr::Kind::Number;
                        out->number = 0;
                        break;
                    }
                    out->kind = Expr::Kind::Var;
                    out->index = vi;
                    break;
                }
                int ai = action_index(p, e->name);
                if (ai >= 0) {
                    out->kind = Expr::Kind::ActionTok;
                    out->index = ai;
                    break;
                }
                if (enums.ambiguous.count(e->name)) {
                    error(DiagCode::UndeclaredVariable,
                          "enum label '" + e->name +
                              "' is ambiguous across enum domains; rename a label",
                          e->span);
                    out->kind = Expr::Kind::Number;
                    out->number = 0;
                    break;
                }
                auto it = enums.ordinal.find(e->name);
                if (it != enums.ordinal.end()) {
                    out->kind = Expr::Kind::EnumConst;
                    out->index = it->second;
                    break;
                }
                error(DiagCode::UndeclaredVariable, "unknown name '" + e->name + "'", e->span);
                out->kind = Expr::Kind::Number;
                out->number = 0;
                break;
            }
            case Expr::Kind::VecIndex: {
                int vi = variable_index(p, e->name);
                if (vi < 0) {
                    error(DiagCode::UndeclaredVariable, "unknown name '" + e->name + "'",
                          e->span);
                    out->kind = Expr::Kind::Number;
                    out->number = 0;
                    break;
                }
                if (p.variables[vi].domain.kind != DomainKind::Vec) {
                    error(DiagCode::InvalidDomain,
                          "variable '" + e->name + "' is not a vector", e->span);
                    out->kind = Expr::Kind::Number;
                    out->number = 0;
                    break;
                }
                out->index = vi;
                out->a = expr(e->a);
                break;
            }
            case Expr::Kind::Let: {
                out->a = expr(e->a);
                std::size_t mark = locals.size();
                out->index = push_local(e->name);
                out->b = expr(e->b);
                pop_to(mark);
                break;
            }
            default: {
                out->a = expr(e->a);
                out->b = expr(e->b);
                out->c = expr(e->c);
                out->args.clear();
                for (const auto& arg : e->args) out->args.push_back(expr(arg));
                break;
            }
        }
        return out;
    }

    Block block(const Block& b) {
        std::size_t mark = locals.size();
        Block out;
        for (const auto& s : b) out.push_back(stmt(s));
        pop_to(mark);
        return out;
    }

    StmtPtr stmt(const StmtPtr& s0) {
        auto out = std::make_shared<Stmt>(*s0);
        switch (s0->kind) {
            case Stmt::Kind::Assign:
            case Stmt::Kind::Increment: {
                out->target_index = -1;
                if (local_lookup(s0->target) >= 0) {
                    error(DiagCode::UnknownTarget,
                          "'" + s0->target + "' is a let binding, not a state variable",
                          s0->span);
                } else {
                    int vi = variable_index(p, s0->target);
                    if (vi < 0) {
                        error(DiagCode::UndeclaredVariable,
                              "assignment target '" + s0->target + "' is not declared",
                              s0->span);
                    } else {
                        out->target_index = vi;
                        bool vec = p.variables[vi].domain.kind == DomainKind::Vec;
                        if (vec && !s0->elem)
                            error(DiagCode::InvalidDomain,
                                  "vector variable '" + s0->target +
                                      "' must be written element-wise",
                                  s0->span);
                        if (!vec && s0->elem)
                            error(DiagCode::InvalidDomain,
                                  "variable '" + s0->target + "' is not a vector", s0->span);
                    }
                }
                out->elem = expr(s0->elem);
                out->value = expr(s0->value);
                break;
            }
            case Stmt::Kind::If: {
                out->cond = expr(s0->cond);
                out->then_body = block(s0->then_body);
                out->else_body = block(s0->else_body);
                break;
            }
            case Stmt::Kind::Let: {
                out->value = expr(s0->value);
                out->let_slot = push_local(s0->let_name);
                break;
            }
            case Stmt::Kind::Emit: {
                out->args.clear();
                for (const auto& a : s0->args) out->args.push_back(expr(a));
                out->color = palette_index(s0->color_name);
                if (out->color < 0)
                    error(DiagCode::UnknownColor,
                          "unknown color '" + s0->color_name + "'", s0->span);
                break;
            }
        }
        return out;
    }
};

inline Init resolve_init(const ast::VarDecl& vd, std::vector<Diagnostic>& diags) {
    Init init;
    init.kind = vd.init.kind;
    const Domain& d = vd.domain;
    auto bad = [&](const std::string& msg) {
        diags.push_back({Severity::Error, DiagCode::InvalidDomain,
                         "variable '" + vd.id + "': " + msg, vd.init.span});
    };
    auto resolve_entry = [&](std::size_t i) -> double {
        const std::string& label = vd.init.labels[i];
        if (label.empty()) return vd.init.numbers[i];
        if (d.kind != DomainKind::Enum) {
            bad("init label '" + label + "' used with a non-enum domain");
            return 0;
        }
        for (std::size_t k = 0; k < d.labels.size(); ++k)
            if (d.labels[k] == label) return static_cast<double>(k);
        bad("unknown enum label '" + label + "'");
        return 0;
    };
    switch (vd.init.kind) {
        case InitKind::Point: {
            if (vd.init.is_vec) {
                if (d.kind != DomainKind::Vec) {
                    bad("tuple init used with a non-vector domain");
                    break;
                }
                if (static_cast<int>(vd.init.numbers.size()) != d.size) {
                    bad("tuple init length does not match the vector length");
                    break;
                }
                init.point.vec = vd.init.numbers;
                break;
            }
            if (d.kind == DomainKind::Vec) {
                bad("vector init must be a tuple");
                break;
            }
            init.point.num = resolve_entry(0);
            break;
        }
        case InitKind::Uniform:
            break;
        case InitKind::Categorical: {
            if (d.kind == DomainKind::Vec) {
                bad("categorical init is not supported for vector domains");
                break;
            }
            for (std::size_t i = 0; i < vd.init.numbers.size(); ++i)
                init.values.push_back(resolve_entry(i));
            init.weights = vd.init.weights;
            break;
        }
    }
    return init;
}

// Resolves a parsed factor against the declared variables. Scope/target id
// resolution and all kind rules are re-checked by check_pomdp afterwards.
inline Factor resolve_factor(const FactoredPOMDP& p, const EnumTable& enums,
                             const ast::FactorDraft& draft, std::vector<Diagnostic>& diags) {
    Factor f;
    f.id = draft.id;
    f.kind = draft.kind;
    f.span = draft.span;
    f.scope = ScopeSet::of(draft.scope);
    if (draft.kind == FactorKind::Reward && !draft.has_targets && !p.score_id.empty())
        f.targets = ScopeSet::of({p.score_id});
    else
        f.targets = ScopeSet::of(draft.targets);
    Resolver r{p, enums, diags, draft.id, {}};
    f.body = r.block(draft.body);
    return f;
}

}  // namespace detail

// Turns a parsed program into checked IR, or the complete list of
// violations. Never throws.
inline ValidateResult validate(const ast::Program& prog) {
    ValidateResult result;
    auto& diags = result.diags;
    FactoredPOMDP p;
    p.meta = prog.meta;

    if (!prog.has_actions)
        diags.push_back({Severity::Error, DiagCode::MissingDeclaration,
                         "missing actions declaration", prog.actions_span});
    p.actions = prog.actions;
    if (action_index(p, "NOOP") < 0) p.actions.push_back("NOOP");

    if (!prog.has_score)
        diags.push_back({Severity::Error, DiagCode::MissingDeclaration,
                         "missing score designation", prog.score_span});
    p.score_id = prog.score_id;
    p.max_steps = prog.has_max_steps ? prog.max_steps : 200;

    for (const auto& vd : prog.vars) {
        if (detail::is_reserved_word(vd.id)) {
            diags.push_back({Severity::Error, DiagCode::ReservedWord,
                             "variable id '" + vd.id + "' is a reserved word", vd.span});
            continue;
        }
        if (variable_index(p, vd.id) >= 0) {
            diags.push_back({Severity::Error, DiagCode::DuplicateId,
                             "duplicate variable id '" + vd.id + "'", vd.span});
            continue;
        }
        StateVariable v;
        v.id = vd.id;
        v.name = vd.label.empty() ? vd.id : vd.label;
        v.domain = vd.domain;
        v.span = vd.span;
        v.init = detail::resolve_init(vd, diags);
        p.variables.push_back(std::move(v));
    }
    for (const auto& a : p.actions) {
        if (detail::is_reserved_word(a))
            diags.push_back({Severity::Error, DiagCode::ReservedWord,
                             "action token '" + a + "' is a reserved word", prog.actions_span});
    }
    p.score_index = variable_index(p, p.score_id);

    detail::EnumTable enums = detail::EnumTable::build(p);

    std::set<std::string> factor_ids;
    for (const auto& draft : prog.factors) {
        if (!factor_ids.insert(draft.id).second) {
            diags.push_back({Severity::Error, DiagCode::DuplicateId,
                             "duplicate factor id '" + draft.id + "'", draft.span});
            continue;
        }
        Factor f = detail::resolve_factor(p, enums, draft, diags);
        f.order_index = next_order_index(p, f.kind);
        p.factors.push_back(std::move(f));
    }
    sort_evaluation_order(p.factors);

    // Semantic rules shared with structural edits. Skip the checks that
    // merely restate a missing declaration already reported above.
    for (const auto& d : check_pomdp(p)) {
        if (!prog.has_score && d.code == DiagCode::InvalidScore) continue;
        if (!prog.has_actions && d.code == DiagCode::UnknownAction) continue;
        diags.push_back(d);
    }

    result.pomdp = std::move(p);
    return result;
}

// Convenience: parse + validate in one call; parse diagnostics win.
inline ValidateResult validate_source(const std::string& source) {
    ParseResult pr = parse(source);
    if (!pr.ok()) {
        ValidateResult r;
        r.diags = pr.diags;
        return r;
    }
    ValidateResult r = validate(pr.program);
    r.diags.insert(r.diags.begin(), pr.diags.begin(), pr.diags.end());
    return r;
}

}  // namespace fsim
