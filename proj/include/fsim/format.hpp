#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "fsim/ast.hpp"
#include "fsim/ir.hpp"

namespace fsim {

// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    if (res.ec != std::errc()) return "0";
    return std::string(buf, res.ptr);
}

inline std::string escape_string(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c; break;
        }
    }
    out += '"';
    return out;
}

namespace detail {

// Operator precedence, loosest first. If/let expressions always take parens
// in operand position so statements parse back unambiguously.
inline int expr_prec(const Expr& e) {
    switch (e.kind) {
        case Expr::Kind::If:
        case Expr::Kind::Let: return 0;
        case Expr::Kind::Binary:
            switch (e.bin) {
                case BinOp::Or: return 1;
                case BinOp::And: return 2;
                case BinOp::Eq: case BinOp::Ne: case BinOp::Lt:
                case BinOp::Le: case BinOp::Gt: case BinOp::Ge: return 4;
                case BinOp::Add: case BinOp::Sub: return 5;
                case BinOp::Mul: case BinOp::Div: return 6;
            }
            return 5;
        case Expr::Kind::Unary: return e.un == UnOp::Not ? 3 : 7;
        default: return 9;
    }
}

inline const char* binop_text(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return "and";
        case BinOp::Or: return "or";
    }
    return "?";
}

inline const char* builtin_text(Builtin b) {
    switch (b) {
        case Builtin::Clamp: return "clamp";
        case Builtin::Abs: return "abs";
        case Builtin::Min: return "min";
        case Builtin::Max: return "max";
        case Builtin::Bernoulli: return "bernoulli";
        case Builtin::UniformInt: return "uniform_int";
        case Builtin::UniformReal: return "uniform_real";
        case Builtin::Categorical: return "categorical";
    }
    return "?";
}

inline void format_expr(const ExprPtr& e, std::string& out);

inline void format_child(const ExprPtr& child, int min_prec, std::string& out) {
    if (!child) return;
    bool parens = expr_prec(*child) < min_prec;
    if (parens) out += '(';
    format_expr(child, out);
    if (parens) out += ')';
}

inline void format_expr(const ExprPtr& e, std::string& out) {
    if (!e) return;
    switch (e->kind) {
        case Expr::Kind::Number: out += format_number(e->number); break;
        case Expr::Kind::BoolLit: out += e->bval ? "true" : "false"; break;
        case Expr::Kind::ActionCur: out += "action"; break;
        case Expr::Kind::Ident:
        case Expr::Kind::Var:
        case Expr::Kind::Local:
        case Expr::Kind::EnumConst:
        case Expr::Kind::ActionTok: out += e->name; break;
        case Expr::Kind::VecIndex:
            out += e->name;
            out += '[';
            format_expr(e->a, out);
            out += ']';
            break;
        case Expr::Kind::Unary: {
            int prec = expr_prec(*e);
            if (e->un == UnOp::Not) {
                out += "not ";
                format_child(e->a, prec, out);
            } else {
                out += '-';
                format_child(e->a, prec, out);
            }
            break;
        }
        case Expr::Kind::Binary: {
            int prec = expr_prec(*e);
            bool comparison = prec == 4;  // non-associative
            format_child(e->a, prec + (comparison ? 1 : 0), out);
            out += ' ';
            out += binop_text(e->bin);
            out += ' ';
            // operators parse left-associative, so equal-precedence right
            // children keep their parentheses
            format_child(e->b, prec + 1, out);
            break;
        }
        case Expr::Kind::If:
            out += "if ";
            format_expr(e->a, out);
            out += " then ";
            format_expr(e->b, out);
            out += " else ";
            format_expr(e->c, out);
            break;
        case Expr::Kind::Let:
            out += "let ";
            out += e->name;
            out += " = ";
            format_expr(e->a, out);
            out += " in ";
            format_expr(e->b, out);
            break;
        case Expr::Kind::Call: {
            out += builtin_text(e->builtin);
            out += '(';
            for (std::size_t i = 0; i < e->args.size(); ++i) {
                if (i) out += ", ";
                format_expr(e->args[i], out);
            }
            out += ')';
            break;
        }
    }
}

inline void indent(int depth, std::string& out) {
    for (int i = 0; i < depth; ++i) out += "  ";
}

inline void format_block(const Block& b, int depth, std::string& out);

inline void format_stmt(const Stmt& s, int depth, std::string& out) {
    indent(depth, out);
    switch (s.kind) {
        case Stmt::Kind::Assign:
        case Stmt::Kind::Increment:
            out += s.target;
            if (s.elem) {
                out += '[';
                format_expr(s.elem, out);
                out += ']';
            }
            out += s.kind == Stmt::Kind::Assign ? " := " : " += ";
            format_expr(s.value, out);
            out += '\n';
            break;
        case Stmt::Kind::Let:
            out += "let ";
            out += s.let_name;
            out += " = ";
            format_expr(s.value, out);
            out += '\n';
            break;
        case Stmt::Kind::If: {
            out += "if ";
            format_expr(s.cond, out);
            out += " {\n";
            format_block(s.then_body, depth + 1, out);
            indent(depth, out);
            out += '}';
            // single nested if collapses into an else-if chain
            if (s.else_body.size() == 1 && s.else_body[0]->kind == Stmt::Kind::If) {
                out += " else ";
                std::string chain;
                format_stmt(*s.else_body[0], depth, chain);
                // strip the indentation the nested call added
                out += chain.substr(2 * depth);
            } else if (!s.else_body.empty()) {
                out += " else {\n";
                format_block(s.else_body, depth + 1, out);
                indent(depth, out);
                out += "}\n";
            } else {
                out += '\n';
            }
            break;
        }
        case Stmt::Kind::Emit: {
            out += to_string(s.shape);
            out += '(';
            for (std::size_t i = 0; i < s.args.size(); ++i) {
                if (i) out += ", ";
                format_expr(s.args[i], out);
            }
            if (s.shape == ShapeKind::Text) {
                out += ", ";
                out += escape_string(s.text);
            }
            out += ", ";
            out += s.color >= 0 && s.color < static_cast<int>(palette_names().size())
                       ? palette_names()[s.color]
                       : s.color_name;
            out += ")\n";
            break;
        }
    }
}

inline void format_block(const Block& b, int depth, std::string& out) {
    for (const auto& s : b) format_stmt(*s, depth, out);
}

inline std::string format_domain(const Domain& d) {
    switch (d.kind) {
        case DomainKind::Bool: return "bool";
        case DomainKind::Int:
            return "int[" + format_number(d.lo) + ", " + format_number(d.hi) + "]";
        case DomainKind::Real:
            return "real[" + format_number(d.lo) + ", " + format_number(d.hi) + "]";
        case DomainKind::Enum: {
            std::string out = "enum{";
            for (std::size_t i = 0; i < d.labels.size(); ++i) {
                if (i) out += ", ";
                out += d.labels[i];
            }
            out += '}';
            return out;
        }
        case DomainKind::Vec:
            return "vec(" + std::to_string(d.size) + ")[" + format_number(d.lo) + ", " +
                   format_number(d.hi) + "]";
    }
    return "bool";
}

inline std::string format_init_value(const Domain& d, double v) {
    switch (d.kind) {
        case DomainKind::Bool: return v != 0 ? "true" : "false";
        case DomainKind::Enum: {
            auto k = static_cast<std::size_t>(v);
            if (k < d.labels.size()) return d.labels[k];
            return format_number(v);
        }
        default: return format_number(v);
    }
}

inline std::string format_init(const StateVariable& var) {
    const Init& init = var.init;
    switch (init.kind) {
        case InitKind::Uniform: return "uniform";
        case InitKind::Categorical: {
            std::string out = "categorical(";
            for (std::size_t i = 0; i < init.values.size(); ++i) {
                if (i) out += ", ";
                out += format_init_value(var.domain, init.values[i]);
                out += ": ";
                out += format_number(i < init.weights.size() ? init.weights[i] : 0);
            }
            out += ')';
            return out;
        }
        case InitKind::Point: {
            if (var.domain.kind == DomainKind::Vec) {
                std::string out = "(";
                for (std::size_t i = 0; i < init.point.vec.size(); ++i) {
                    if (i) out += ", ";
                    out += format_number(init.point.vec[i]);
                }
                out += ')';
                return out;
            }
            return format_init_value(var.domain, init.point.num);
        }
    }
    return "0";
}

}  // namespace detail

inline std::string format_variable(const StateVariable& v) {
    std::string out = "var " + v.id + " : " + detail::format_domain(v.domain) + " init " +
                      detail::format_init(v);
    if (!v.name.empty() && v.name != v.id) out += " label " + escape_string(v.name);
    out += '\n';
    return out;
}

// The factor as a standalone block; this is the source form quoted in
// prompts and patches.
inline std::string format_factor(const Factor& f) {
    std::string out = std::string(to_string(f.kind)) + " " + f.id + " {\n";
    if (!f.scope.empty()) {
        out += "  scope";
        for (const auto& id : f.scope.variable_ids) out += " " + id;
        out += '\n';
    }
    if (!f.targets.empty()) {
        out += "  targets";
        for (const auto& id : f.targets.variable_ids) out += " " + id;
        out += '\n';
    }
    detail::format_block(f.body, 1, out);
    out += "}\n";
    return out;
}

inline std::string format_statements(const Block& b) {
    std::string out;
    detail::format_block(b, 0, out);
    return out;
}

inline std::string format_expression(const ExprPtr& e) {
    std::string out;
    detail::format_expr(e, out);
    return out;
}

// Canonical source: header, variables, then factors in evaluation order.
// Formatting is deterministic and involutive.
inline std::string format(const FactoredPOMDP& p) {
    std::string out;
    if (!p.meta.name.empty()) out += "name " + escape_string(p.meta.name) + '\n';
    if (!p.meta.description.empty())
        out += "description " + escape_string(p.meta.description) + '\n';
    out += "actions";
    for (const auto& a : p.actions) out += " " + a;
    out += '\n';
    out += "score " + p.score_id + '\n';
    out += "max_steps " + std::to_string(p.max_steps) + '\n';
    out += '\n';
    for (const auto& v : p.variables) out += format_variable(v);
    std::vector<Factor> sorted = p.factors;
    sort_evaluation_order(sorted);
    for (const auto& f : sorted) {
        out += '\n';
        out += format_factor(f);
    }
    return out;
}

}  // namespace fsim
