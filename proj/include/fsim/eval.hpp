#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fsim/diag.hpp"
#include "fsim/ir.hpp"
#include "fsim/rng.hpp"

namespace fsim {

// One drawing primitive emitted by a view body.
struct Shape {
    ShapeKind kind = ShapeKind::Rect;
    double x = 0, y = 0;
    double w = 0, h = 0;  // rect
    double r = 0;         // circle
    std::string text;     // text
    int color = 0;
};

inline bool shape_equal(const Shape& a, const Shape& b) {
    return a.kind == b.kind && a.x == b.x && a.y == b.y && a.w == b.w && a.h == b.h &&
           a.r == b.r && a.text == b.text && a.color == b.color;
}

// ---------------------------------------------------------------------------
// Interpreter for resolved factor bodies. All randomness is routed through
// the injected ChoiceSource; all out-of-range values are repaired with a
// warning, never an exception, so imperfect programs still run.

constexpr std::size_t kMaxWarnings = 256;

struct EvalCtx {
    const FactoredPOMDP& p;
    std::vector<Value>& values;  // one per variable, updated in place
    ChoiceSource& choice;
    int action = -1;  // ordinal; -1 outside controller phase
    std::vector<double> locals;
    std::vector<Shape>* shapes = nullptr;        // optional view sink
    std::vector<Diagnostic>* warnings = nullptr;  // optional, capped

    void warn(DiagCode code, const std::string& msg, Span span = {}) {
        if (warnings && warnings->size() < kMaxWarnings)
            warnings->push_back({Severity::Warning, code, msg, span});
    }
    void set_local(int slot, double v) {
        if (slot < 0) return;
        if (static_cast<std::size_t>(slot) >= locals.size()) locals.resize(slot + 1, 0.0);
        locals[static_cast<std::size_t>(slot)] = v;
    }
    double get_local(int slot) const {
        if (slot < 0 || static_cast<std::size_t>(slot) >= locals.size()) return 0;
        return locals[static_cast<std::size_t>(slot)];
    }
};

namespace detail {

inline double repair_nan(EvalCtx& ctx, double v, Span span) {
    if (std::isnan(v)) {
        ctx.warn(DiagCode::NotFinite, "non-finite value repaired to 0", span);
        return 0;
    }
    return v;
}

// Index into a vector variable: rounded and clamped into range.
inline int vec_slot(EvalCtx& ctx, const Domain& d, double raw, Span span) {
    if (std::isnan(raw)) raw = 0;
    long long i = std::llround(raw);
    if (i < 0 || i >= d.size) {
        ctx.warn(DiagCode::CapExceeded, "vector index out of range; clamped", span);
        i = i < 0 ? 0 : d.size - 1;
    }
    return static_cast<int>(i);
}

}  // namespace detail

inline double eval_expr(EvalCtx& ctx, const ExprPtr& e);

namespace detail {

inline double eval_call(EvalCtx& ctx, const Expr& e) {
    auto arg = [&](std::size_t i) { return eval_expr(ctx, e.args[i]); };
    switch (e.builtin) {
        case Builtin::Abs: return std::fabs(arg(0));
        case Builtin::Min: return std::fmin(arg(0), arg(1));
        case Builtin::Max: return std::fmax(arg(0), arg(1));
        case Builtin::Clamp: {
            double x = arg(0), lo = arg(1), hi = arg(2);
            if (lo > hi) {
                ctx.warn(DiagCode::InvalidDomain, "clamp bounds reversed", e.span);
                std::swap(lo, hi);
            }
            return std::fmin(std::fmax(x, lo), hi);
        }
        case Builtin::Bernoulli: {
            double p = repair_nan(ctx, arg(0), e.span);
            if (p < 0 || p > 1) {
                ctx.warn(DiagCode::InvalidDomain, "bernoulli probability clamped to [0, 1]",
                         e.span);
                p = std::fmin(std::fmax(p, 0.0), 1.0);
            }
            return ctx.choice.bernoulli(p) ? 1 : 0;
        }
        case Builtin::UniformInt: {
            double a = repair_nan(ctx, arg(0), e.span);
            double b = repair_nan(ctx, arg(1), e.span);
            long long lo = std::llround(a), hi = std::llround(b);
            if (lo > hi) {
                ctx.warn(DiagCode::InvalidDomain, "uniform_int bounds reversed", e.span);
                std::swap(lo, hi);
            }
            return static_cast<double>(ctx.choice.uniform_int(lo, hi));
        }
        case Builtin::UniformReal: {
            double a = repair_nan(ctx, arg(0), e.span);
            double b = repair_nan(ctx, arg(1), e.span);
            if (a > b) {
                ctx.warn(DiagCode::InvalidDomain, "uniform_real bounds reversed", e.span);
                std::swap(a, b);
            }
            return ctx.choice.uniform_real(a, b);
        }
        case Builtin::Categorical: {
            std::vector<double> w(e.args.size());
            double total = 0;
            for (std::size_t i = 0; i < e.args.size(); ++i) {
                double x = repair_nan(ctx, eval_expr(ctx, e.args[i]), e.span);
                if (x < 0) {
                    ctx.warn(DiagCode::InvalidDomain,
                             "negative categorical weight repaired to 0", e.span);
                    x = 0;
                }
                w[i] = x;
                total += x;
            }
            if (total <= 0) {
                ctx.warn(DiagCode::InvalidDomain,
                         "categorical weights sum to 0; using a uniform draw", e.span);
                for (auto& x : w) x = 1;
            }
            return static_cast<double>(ctx.choice.categorical(w));
        }
    }
    return 0;
}

}  // namespace detail

inline double eval_expr(EvalCtx& ctx, const ExprPtr& e) {
    if (!e) return 0;
    switch (e->kind) {
        case Expr::Kind::Number: return e->number;
        case Expr::Kind::BoolLit: return e->bval ? 1 : 0;
        case Expr::Kind::Ident: return 0;  // unresolved trees never reach evaluation
        case Expr::Kind::Var: return ctx.values[static_cast<std::size_t>(e->index)].num;
        case Expr::Kind::VecIndex: {
            const Domain& d = ctx.p.variables[static_cast<std::size_t>(e->index)].domain;
            int i = detail::vec_slot(ctx, d, eval_expr(ctx, e->a), e->span);
            return ctx.values[static_cast<std::size_t>(e->index)].vec[static_cast<std::size_t>(i)];
        }
        case Expr::Kind::Local: return ctx.get_local(e->index);
        case Expr::Kind::EnumConst:
        case Expr::Kind::ActionTok: return static_cast<double>(e->index);
        case Expr::Kind::ActionCur: return static_cast<double>(ctx.action);
        case Expr::Kind::Unary: {
            double a = eval_expr(ctx, e->a);
            return e->un == UnOp::Neg ? -a : (a == 0 ? 1 : 0);
        }
        case Expr::Kind::Binary: {
            switch (e->bin) {
                case BinOp::And: return eval_expr(ctx, e->a) != 0 && eval_expr(ctx, e->b) != 0;
                case BinOp::Or: return eval_expr(ctx, e->a) != 0 || eval_expr(ctx, e->b) != 0;
                default: break;
            }
            double a = eval_expr(ctx, e->a);
            double b = eval_expr(ctx, e->b);
            switch (e->bin) {
                case BinOp::Add: return a + b;
                case BinOp::Sub: return a - b;
                case BinOp::Mul: return a * b;
                case BinOp::Div:
                    if (b == 0) {
                        ctx.warn(DiagCode::NotFinite, "division by zero evaluates to 0",
                                 e->span);
                        return 0;
                    }
                    return a / b;
                case BinOp::Eq: return a == b;
                case BinOp::Ne: return a != b;
                case BinOp::Lt: return a < b;
                case BinOp::Le: return a <= b;
                case BinOp::Gt: return a > b;
                case BinOp::Ge: return a >= b;
                default: return 0;
            }
        }
        case Expr::Kind::If:
            return eval_expr(ctx, e->a) != 0 ? eval_expr(ctx, e->b) : eval_expr(ctx, e->c);
        case Expr::Kind::Let: {
            ctx.set_local(e->index, eval_expr(ctx, e->a));
            return eval_expr(ctx, e->b);
        }
        case Expr::Kind::Call: return detail::eval_call(ctx, *e);
    }
    return 0;
}

// Writes a raw value into a variable, repairing instead of failing: NaN
// becomes 0, integral domains round, everything clamps into bounds.
inline double coerce_scalar(EvalCtx& ctx, const Domain& d, double raw, Span span) {
    raw = detail::repair_nan(ctx, raw, span);
    double v = raw;
    switch (d.kind) {
        case DomainKind::Bool: return v != 0 ? 1 : 0;
        case DomainKind::Int:
        case DomainKind::Enum: {
            double lo = d.kind == DomainKind::Int ? d.lo : 0;
            double hi = d.kind == DomainKind::Int
                            ? d.hi
                            : static_cast<double>(d.labels.size()) - 1;
            v = static_cast<double>(std::llround(std::fmin(std::fmax(v, -9e18), 9e18)));
            if (v < lo || v > hi) {
                ctx.warn(DiagCode::CapExceeded, "write clamped into the variable's domain",
                         span);
                v = std::fmin(std::fmax(v, lo), hi);
            }
            return v;
        }
        case DomainKind::Real:
        case DomainKind::Vec: {
            if (v < d.lo || v > d.hi) {
                ctx.warn(DiagCode::CapExceeded, "write clamped into the variable's domain",
                         span);
                v = std::fmin(std::fmax(v, d.lo), d.hi);
            }
            return v;
        }
    }
    return v;
}

inline void write_variable(EvalCtx& ctx, const Stmt& s, double raw) {
    if (s.target_index < 0) return;
    auto idx = static_cast<std::size_t>(s.target_index);
    const Domain& d = ctx.p.variables[idx].domain;
    if (d.kind == DomainKind::Vec) {
        int slot = detail::vec_slot(ctx, d, eval_expr(ctx, s.elem), s.span);
        ctx.values[idx].vec[static_cast<std::size_t>(slot)] =
            coerce_scalar(ctx, d, raw, s.span);
        return;
    }
    ctx.values[idx].num = coerce_scalar(ctx, d, raw, s.span);
}

inline void exec_block(EvalCtx& ctx, const Block& b);

inline void exec_stmt(EvalCtx& ctx, const Stmt& s) {
    switch (s.kind) {
        case Stmt::Kind::Assign: write_variable(ctx, s, eval_expr(ctx, s.value)); break;
        case Stmt::Kind::Increment: {
            double delta = eval_expr(ctx, s.value);
            if (s.target_index < 0) break;
            auto idx = static_cast<std::size_t>(s.target_index);
            const Domain& d = ctx.p.variables[idx].domain;
            if (d.kind == DomainKind::Vec) {
                int slot = detail::vec_slot(ctx, d, eval_expr(ctx, s.elem), s.span);
                auto& cell = ctx.values[idx].vec[static_cast<std::size_t>(slot)];
                cell = coerce_scalar(ctx, d, cell + delta, s.span);
            } else {
                ctx.values[idx].num = coerce_scalar(ctx, d, ctx.values[idx].num + delta, s.span);
            }
            break;
        }
        case Stmt::Kind::If:
            if (eval_expr(ctx, s.cond) != 0)
                exec_block(ctx, s.then_body);
            else
                exec_block(ctx, s.else_body);
            break;
        case Stmt::Kind::Let: ctx.set_local(s.let_slot, eval_expr(ctx, s.value)); break;
        case Stmt::Kind::Emit: {
            // argument draws happen whether or not anyone collects shapes,
            // keeping state evolution independent of observation requests
            Shape shape;
            shape.kind = s.shape;
            shape.color = s.color;
            shape.text = s.text;
            double a0 = s.args.size() > 0 ? eval_expr(ctx, s.args[0]) : 0;
            double a1 = s.args.size() > 1 ? eval_expr(ctx, s.args[1]) : 0;
            double a2 = s.args.size() > 2 ? eval_expr(ctx, s.args[2]) : 0;
            double a3 = s.args.size() > 3 ? eval_expr(ctx, s.args[3]) : 0;
            shape.x = a0;
            shape.y = a1;
            if (s.shape == ShapeKind::Rect) {
                shape.w = a2;
                shape.h = a3;
            } else if (s.shape == ShapeKind::Circle) {
                shape.r = a2;
            }
            if (ctx.shapes) ctx.shapes->push_back(std::move(shape));
            break;
        }
    }
}

inline void exec_block(EvalCtx& ctx, const Block& b) {
    for (const auto& s : b) exec_stmt(ctx, *s);
}

// Runs one factor body. Locals reset per body; the action ordinal is only
// visible to controllers.
inline void exec_factor(EvalCtx& ctx, const Factor& f, int action_ordinal) {
    ctx.locals.clear();
    ctx.action = f.kind == FactorKind::Controller ? action_ordinal : -1;
    exec_block(ctx, f.body);
    ctx.action = -1;
}

}  // namespace fsim
