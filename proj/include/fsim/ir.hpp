#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fsim/ast.hpp"
#include "fsim/diag.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Runtime values. Scalars (bool, int, real, enum ordinal) live in `num`;
// vector variables use `vec`.

struct Value {
    double num = 0;
    std::vector<double> vec;
};

inline bool value_equal(const Value& a, const Value& b) {
    return a.num == b.num && a.vec == b.vec;
}

// Checked initial-value distribution.
struct Init {
    InitKind kind = InitKind::Point;
    Value point;                  // Point
    std::vector<double> values;   // Categorical support (scalar domains)
    std::vector<double> weights;  // Categorical weights, normalized
};

struct StateVariable {
    std::string id;
    std::string name;  // human label; falls back to id when empty
    Domain domain;
    Init init;
    Span span;  // declaration site; zero for programmatic values
};

// Ordered (sorted, duplicate-free) set of variable ids.
struct ScopeSet {
    std::vector<std::string> variable_ids;

    static ScopeSet of(std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ScopeSet{std::move(ids)};
    }
    bool contains(const std::string& id) const {
        return std::binary_search(variable_ids.begin(), variable_ids.end(), id);
    }
    bool empty() const { return variable_ids.empty(); }
    bool overlaps(const ScopeSet& o) const {
        for (const auto& id : variable_ids)
            if (o.contains(id)) return true;
        return false;
    }
    ScopeSet unioned(const ScopeSet& o) const {
        std::vector<std::string> ids = variable_ids;
        ids.insert(ids.end(), o.variable_ids.begin(), o.variable_ids.end());
        return of(std::move(ids));
    }
    bool operator==(const ScopeSet& o) const { return variable_ids == o.variable_ids; }
};

// One scoped update unit. The body is fully resolved: Var/Local/EnumConst/
// ActionTok leaves carry slot indices, never free identifiers.
struct Factor {
    std::string id;
    FactorKind kind = FactorKind::Model;
    ScopeSet scope;    // declared read set
    ScopeSet targets;  // declared write set; empty for view
    Block body;
    int order_index = 0;  // position within its kind
    Span span;
};

struct FactoredPOMDP {
    Metadata meta;
    std::vector<std::string> actions;  // includes NOOP
    std::vector<StateVariable> variables;
    std::vector<Factor> factors;  // kept in evaluation order
    std::string score_id;
    int score_index = -1;
    long long max_steps = 1;
};

// A validated structural edit: new variables plus factors to add or replace.
struct PatchFactor {
    Factor factor;
    bool replace = false;
};

struct Patch {
    std::vector<StateVariable> new_variables;
    std::vector<PatchFactor> factors;
};

// ---------------------------------------------------------------------------
// Lookups.

inline int variable_index(const FactoredPOMDP& p, const std::string& id) {
    for (std::size_t i = 0; i < p.variables.size(); ++i)
        if (p.variables[i].id == id) return static_cast<int>(i);
    return -1;
}

inline int action_index(const FactoredPOMDP& p, const std::string& token) {
    for (std::size_t i = 0; i < p.actions.size(); ++i)
        if (p.actions[i] == token) return static_cast<int>(i);
    return -1;
}

inline const Factor* find_factor(const FactoredPOMDP& p, const std::string& id) {
    for (const auto& f : p.factors)
        if (f.id == id) return &f;
    return nullptr;
}

inline int kind_rank(FactorKind k) {
    switch (k) {
        case FactorKind::Controller: return 0;
        case FactorKind::Model: return 1;
        case FactorKind::Reward: return 2;
        case FactorKind::View: return 3;
    }
    return 4;
}

// Evaluation order: controller, model, reward, view; within a kind by
// order_index (unique), ties broken by id for safety.
inline void sort_evaluation_order(std::vector<Factor>& fs) {
    std::stable_sort(fs.begin(), fs.end(), [](const Factor& a, const Factor& b) {
        if (kind_rank(a.kind) != kind_rank(b.kind)) return kind_rank(a.kind) < kind_rank(b.kind);
        if (a.order_index != b.order_index) return a.order_index < b.order_index;
        return a.id < b.id;
    });
}

// ---------------------------------------------------------------------------
// Domain helpers.

inline bool domain_finite(const Domain& d) { return d.finite(); }

inline long long domain_card(const Domain& d) { return d.cardinality(); }

// k-th value of a finite domain, k in [0, cardinality).
inline double domain_nth(const Domain& d, long long k) {
    switch (d.kind) {
        case DomainKind::Bool: return k ? 1.0 : 0.0;
        case DomainKind::Int: return d.lo + static_cast<double>(k);
        case DomainKind::Enum: return static_cast<double>(k);
        default: return 0;
    }
}

inline long long domain_ord(const Domain& d, double v) {
    switch (d.kind) {
        case DomainKind::Bool: return v != 0 ? 1 : 0;
        case DomainKind::Int: return static_cast<long long>(v - d.lo);
        case DomainKind::Enum: return static_cast<long long>(v);
        default: return 0;
    }
}

inline bool domain_contains(const Domain& d, const Value& v) {
    switch (d.kind) {
        case DomainKind::Bool: return v.num == 0 || v.num == 1;
        case DomainKind::Int:
            return v.num >= d.lo && v.num <= d.hi && v.num == std::floor(v.num);
        case DomainKind::Real: return v.num >= d.lo && v.num <= d.hi;
        case DomainKind::Enum:
            return v.num >= 0 && v.num < static_cast<double>(d.labels.size()) &&
                   v.num == std::floor(v.num);
        case DomainKind::Vec:
            if (static_cast<int>(v.vec.size()) != d.size) return false;
            for (double x : v.vec)
                if (!(x >= d.lo && x <= d.hi)) return false;
            return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Body analysis. Reads are variable slots whose values the body can observe;
// an increment's implicit old value is treated as part of the write, not a
// read, so reward factors need not carry the score in scope.

struct BodyInfo {
    std::map<int, Span> reads;       // variable slot -> first occurrence
    std::map<int, Span> assigns;
    std::map<int, Span> increments;
    bool uses_action = false;
    Span action_span;
    bool has_emit = false;
    Span emit_span;
    bool has_random = false;
};

inline void note(std::map<int, Span>& m, int slot, Span s) {
    m.emplace(slot, s);  // keeps the first span seen
}

inline void analyze_expr(const ExprPtr& e, BodyInfo& out) {
    if (!e) return;
    switch (e->kind) {
        case Expr::Kind::Var: note(out.reads, e->index, e->span); break;
        case Expr::Kind::VecIndex: note(out.reads, e->index, e->span); break;
        case Expr::Kind::ActionCur:
            if (!out.uses_action) out.action_span = e->span;
            out.uses_action = true;
            break;
        case Expr::Kind::Call:
            if (e->builtin == Builtin::Bernoulli || e->builtin == Builtin::UniformInt ||
                e->builtin == Builtin::UniformReal || e->builtin == Builtin::Categorical)
                out.has_random = true;
            break;
        default: break;
    }
    analyze_expr(e->a, out);
    analyze_expr(e->b, out);
    analyze_expr(e->c, out);
    for (const auto& arg : e->args) analyze_expr(arg, out);
}

inline void analyze_block(const Block& b, BodyInfo& out);

inline void analyze_stmt(const Stmt& s, BodyInfo& out) {
    switch (s.kind) {
        case Stmt::Kind::Assign:
            note(out.assigns, s.target_index, s.span);
            analyze_expr(s.elem, out);
            analyze_expr(s.value, out);
            break;
        case Stmt::Kind::Increment:
            note(out.increments, s.target_index, s.span);
            analyze_expr(s.elem, out);
            analyze_expr(s.value, out);
            break;
        case Stmt::Kind::If:
            analyze_expr(s.cond, out);
            analyze_block(s.then_body, out);
            analyze_block(s.else_body, out);
            break;
        case Stmt::Kind::Let: analyze_expr(s.value, out); break;
        case Stmt::Kind::Emit:
            if (!out.has_emit) out.emit_span = s.span;
            out.has_emit = true;
            for (const auto& a : s.args) analyze_expr(a, out);
            break;
    }
}

inline void analyze_block(const Block& b, BodyInfo& out) {
    for (const auto& s : b) analyze_stmt(*s, out);
}

inline BodyInfo analyze_body(const Block& b) {
    BodyInfo info;
    analyze_block(b, info);
    return info;
}

// ---------------------------------------------------------------------------
// Integrity checks on a resolved POMDP. validate() funnels through this and
// apply_structural_edit re-runs it, so every constructed value obeys the same
// rules.

inline void check_init(const StateVariable& v, std::vector<Diagnostic>& out) {
    const Domain& d = v.domain;
    if (d.hi < d.lo || (d.kind == DomainKind::Vec && d.size <= 0) ||
        (d.kind == DomainKind::Enum && d.labels.empty())) {
        out.push_back({Severity::Error, DiagCode::InvalidDomain,
                       "variable '" + v.id + "' has invalid domain bounds", v.span});
        return;
    }
    switch (v.init.kind) {
        case InitKind::Point:
            if (!domain_contains(d, v.init.point))
                out.push_back({Severity::Error, DiagCode::InvalidDomain,
                               "init value of '" + v.id + "' lies outside its domain", v.span});
            break;
        case InitKind::Uniform:
            break;
        case InitKind::Categorical: {
            if (v.init.values.size() != v.init.weights.size() || v.init.values.empty()) {
                out.push_back({Severity::Error, DiagCode::NonNormalizedInit,
                               "categorical init of '" + v.id + "' is malformed", v.span});
                break;
            }
            double sum = 0;
            bool neg = false;
            for (double w : v.init.weights) {
                if (w < 0) neg = true;
                sum += w;
            }
            if (neg || std::fabs(sum - 1.0) > 1e-9)
                out.push_back({Severity::Error, DiagCode::NonNormalizedInit,
                               "categorical init weights of '" + v.id +
                                   "' must be nonnegative and sum to 1",
                               v.span});
            for (double val : v.init.values) {
                Value tmp;
                tmp.num = val;
                if (d.kind != DomainKind::Vec && !domain_contains(d, tmp))
                    out.push_back({Severity::Error, DiagCode::InvalidDomain,
                                   "categorical init of '" + v.id +
                                       "' lists a value outside its domain",
                                   v.span});
            }
            break;
        }
    }
}

inline void check_factor(const FactoredPOMDP& p, const Factor& f, std::vector<Diagnostic>& out) {
    auto resolve_set = [&](const ScopeSet& ss, const char* what) {
        for (const auto& id : ss.variable_ids)
            if (variable_index(p, id) < 0)
                out.push_back({Severity::Error, DiagCode::UndeclaredVariable,
                               "factor '" + f.id + "' " + what + " undeclared variable '" + id +
                                   "'",
                               f.span});
    };
    resolve_set(f.scope, "scopes");
    resolve_set(f.targets, "targets");

    BodyInfo info = analyze_body(f.body);

    for (const auto& [r, span] : info.reads) {
        if (r < 0 || r >= static_cast<int>(p.variables.size())) continue;
        if (!f.scope.contains(p.variables[r].id))
            out.push_back({Severity::Error, DiagCode::ScopeViolation,
                           "factor '" + f.id + "' reads '" + p.variables[r].id +
                               "' outside its declared scope",
                           span});
    }
    std::map<int, Span> writes = info.assigns;
    writes.insert(info.increments.begin(), info.increments.end());
    for (const auto& [w, span] : writes) {
        if (w < 0 || w >= static_cast<int>(p.variables.size())) continue;
        if (!f.targets.contains(p.variables[w].id))
            out.push_back({Severity::Error, DiagCode::ScopeViolation,
                           "factor '" + f.id + "' writes '" + p.variables[w].id +
                               "' outside its declared targets",
                           span});
    }

    if (info.uses_action && f.kind != FactorKind::Controller)
        out.push_back({Severity::Error, DiagCode::ActionOutsideController,
                       "factor '" + f.id + "' reads the action token but is not a controller",
                       info.action_span});
    if (info.has_emit && f.kind != FactorKind::View)
        out.push_back({Severity::Error, DiagCode::EmitOutsideView,
                       "factor '" + f.id + "' emits shapes but is not a view", info.emit_span});

    if (f.kind == FactorKind::View) {
        if (!info.assigns.empty() || !info.increments.empty() || !f.targets.empty())
            out.push_back({Severity::Error, DiagCode::ViewWritesState,
                           "view factor '" + f.id + "' must not write state", f.span});
    }
    if (f.kind == FactorKind::Reward) {
        bool bad = !info.assigns.empty();
        for (const auto& [w, span] : info.increments)
            if (w != p.score_index) bad = true;
        if (!(f.targets == ScopeSet::of({p.score_id}))) bad = true;
        if (bad)
            out.push_back({Severity::Error, DiagCode::RewardNotIncrement,
                           "reward factor '" + f.id +
                               "' may only increment the score variable '" + p.score_id + "'",
                           f.span});
    }
}

inline std::vector<Diagnostic> check_pomdp(const FactoredPOMDP& p) {
    std::vector<Diagnostic> out;

    std::set<std::string> var_ids;
    for (const auto& v : p.variables) {
        if (!var_ids.insert(v.id).second)
            out.push_back({Severity::Error, DiagCode::DuplicateId,
                           "duplicate variable id '" + v.id + "'", {}});
        check_init(v, out);
    }
    std::set<std::string> factor_ids;
    for (const auto& f : p.factors)
        if (!factor_ids.insert(f.id).second)
            out.push_back(
                {Severity::Error, DiagCode::DuplicateId, "duplicate factor id '" + f.id + "'", {}});

    if (p.actions.empty() || action_index(p, "NOOP") < 0)
        out.push_back({Severity::Error, DiagCode::UnknownAction,
                       "action set must declare tokens and include NOOP", {}});
    std::set<std::string> action_set(p.actions.begin(), p.actions.end());
    if (action_set.size() != p.actions.size())
        out.push_back(
            {Severity::Error, DiagCode::DuplicateId, "duplicate action token declared", {}});

    int sidx = variable_index(p, p.score_id);
    if (sidx < 0 || sidx != p.score_index) {
        out.push_back({Severity::Error, DiagCode::InvalidScore,
                       "score id '" + p.score_id + "' does not resolve to a declared variable",
                       {}});
    } else {
        DomainKind k = p.variables[sidx].domain.kind;
        if (k != DomainKind::Real && k != DomainKind::Int)
            out.push_back({Severity::Error, DiagCode::InvalidScore,
                           "score variable '" + p.score_id +
                               "' must have a bounded real or integer domain",
                           {}});
    }
    if (p.max_steps <= 0)
        out.push_back(
            {Severity::Error, DiagCode::InvalidDomain, "max_steps must be positive", {}});

    for (const auto& f : p.factors) check_factor(p, f, out);
    return out;
}

// ---------------------------------------------------------------------------
// Pure structural operations.

inline int next_order_index(const FactoredPOMDP& p, FactorKind k) {
    int next = 0;
    for (const auto& f : p.factors)
        if (f.kind == k) next = std::max(next, f.order_index + 1);
    return next;
}

inline FactoredPOMDP add_variable(const FactoredPOMDP& p, const StateVariable& v) {
    if (variable_index(p, v.id) >= 0)
        throw SimError(DiagCode::DuplicateId, "variable id '" + v.id + "' already declared");
    std::vector<Diagnostic> diags;
    check_init(v, diags);
    if (has_errors(diags)) throw SimError(DiagCode::InvalidDomain, diags.front().message);
    FactoredPOMDP out = p;
    out.variables.push_back(v);
    out.score_index = variable_index(out, out.score_id);
    return out;
}

// Factors whose scope or targets touch z, in evaluation order.
inline std::vector<Factor> scope_overlap_query(const FactoredPOMDP& p, const ScopeSet& z) {
    for (const auto& id : z.variable_ids)
        if (variable_index(p, id) < 0)
            throw SimError(DiagCode::UnknownVariable,
                           "scope query references undeclared variable '" + id + "'");
    std::vector<Factor> out;
    for (const auto& f : p.factors)
        if (f.scope.overlaps(z) || f.targets.overlaps(z)) out.push_back(f);
    return out;
}

// Applies a validated patch: new variables appended, factors added or
// replaced by id. Throws on any integrity violation in the result.
inline FactoredPOMDP apply_structural_edit(const FactoredPOMDP& p, const Patch& patch) {
    FactoredPOMDP out = p;
    for (const auto& v : patch.new_variables) {
        if (variable_index(out, v.id) >= 0)
            throw SimError(DiagCode::DuplicateId, "variable id '" + v.id + "' already declared");
        out.variables.push_back(v);
    }
    out.score_index = variable_index(out, out.score_id);

    for (const auto& pf : patch.factors) {
        Factor f = pf.factor;
        bool found = false;
        for (auto& existing : out.factors) {
            if (existing.id != f.id) continue;
            if (!pf.replace)
                throw SimError(DiagCode::DuplicateId,
                               "factor id '" + f.id + "' already declared (not a replace)");
            f.order_index = existing.kind == f.kind ? existing.order_index
                                                    : next_order_index(out, f.kind);
            existing = f;
            found = true;
            break;
        }
        if (!found) {
            f.order_index = next_order_index(out, f.kind);
            out.factors.push_back(f);
        }
    }
    sort_evaluation_order(out.factors);

    auto diags = check_pomdp(out);
    if (has_errors(diags)) {
        for (const auto& d : diags)
            if (d.severity == Severity::Error) throw SimError(d.code, d.message);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Structural equality (spans ignored).

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
    if (!a || !b) return !a && !b;
    if (a->kind != b->kind) return false;
    if (a->number != b->number || a->bval != b->bval || a->name != b->name ||
        a->index != b->index || a->un != b->un || a->bin != b->bin || a->builtin != b->builtin)
        return false;
    if (!expr_equal(a->a, b->a) || !expr_equal(a->b, b->b) || !expr_equal(a->c, b->c))
        return false;
    if (a->args.size() != b->args.size()) return false;
    for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!expr_equal(a->args[i], b->args[i])) return false;
    return true;
}

inline bool block_equal(const Block& a, const Block& b);

inline bool stmt_equal(const Stmt& a, const Stmt& b) {
    if (a.kind != b.kind) return false;
    if (a.target != b.target || a.target_index != b.target_index) return false;
    if (!expr_equal(a.elem, b.elem) || !expr_equal(a.value, b.value) ||
        !expr_equal(a.cond, b.cond))
        return false;
    if (!block_equal(a.then_body, b.then_body) || !block_equal(a.else_body, b.else_body))
        return false;
    if (a.let_name != b.let_name || a.let_slot != b.let_slot) return false;
    if (a.shape != b.shape || a.color != b.color || a.text != b.text) return false;
    if (a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!expr_equal(a.args[i], b.args[i])) return false;
    return true;
}

inline bool block_equal(const Block& a, const Block& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!stmt_equal(*a[i], *b[i])) return false;
    return true;
}

inline bool domain_equal(const Domain& a, const Domain& b) {
    return a.kind == b.kind && a.lo == b.lo && a.hi == b.hi && a.labels == b.labels &&
           a.size == b.size;
}

inline bool init_equal(const Init& a, const Init& b) {
    return a.kind == b.kind && value_equal(a.point, b.point) && a.values == b.values &&
           a.weights == b.weights;
}

inline bool variable_equal(const StateVariable& a, const StateVariable& b) {
    return a.id == b.id && a.name == b.name && domain_equal(a.domain, b.domain) &&
           init_equal(a.init, b.init);
}

inline bool factor_equal(const Factor& a, const Factor& b) {
    return a.id == b.id && a.kind == b.kind && a.scope == b.scope && a.targets == b.targets &&
           a.order_index == b.order_index && block_equal(a.body, b.body);
}

inline bool structural_equal(const FactoredPOMDP& a, const FactoredPOMDP& b) {
    if (a.meta.name != b.meta.name || a.meta.description != b.meta.description) return false;
    if (a.actions != b.actions || a.score_id != b.score_id || a.max_steps != b.max_steps)
        return false;
    if (a.variables.size() != b.variables.size() || a.factors.size() != b.factors.size())
        return false;
    for (std::size_t i = 0; i < a.variables.size(); ++i)
        if (!variable_equal(a.variables[i], b.variables[i])) return false;
    for (std::size_t i = 0; i < a.factors.size(); ++i)
        if (!factor_equal(a.factors[i], b.factors[i])) return false;
    return true;
}

// The score-only starting point: one bounded score variable, no factors,
// identity dynamics, reward = score delta.
inline FactoredPOMDP initial_pomdp(const std::vector<std::string>& actions,
                                   const std::string& name = "untitled",
                                   long long max_steps = 200) {
    FactoredPOMDP p;
    p.meta.name = name;
    p.actions = actions;
    if (std::find(p.actions.begin(), p.actions.end(), "NOOP") == p.actions.end())
        p.actions.push_back("NOOP");
    StateVariable score;
    score.id = "score";
    score.name = "score";
    score.domain.kind = DomainKind::Real;
    score.domain.lo = -1e9;
    score.domain.hi = 1e9;
    score.init.kind = InitKind::Point;
    score.init.point.num = 0;
    p.variables.push_back(score);
    p.score_id = "score";
    p.score_index = 0;
    p.max_steps = max_steps;
    return p;
}

}  // namespace fsim
