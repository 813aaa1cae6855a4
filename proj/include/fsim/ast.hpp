#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fsim/diag.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Expression / statement trees.
//
// The parser produces trees containing unresolved Ident leaves. Validation
// resolves every name into Var / Local / EnumConst / ActionTok nodes and the
// resolved trees become factor bodies in the IR. Nodes are immutable and
// shared, so copying a program is cheap.

enum class BinOp { Add, Sub, Mul, Div, Eq, Ne, Lt, Le, Gt, Ge, And, Or };
enum class UnOp { Neg, Not };
enum class Builtin { Clamp, Abs, Min, Max, Bernoulli, UniformInt, UniformReal, Categorical };
enum class ShapeKind { Rect, Circle, Text };
enum class FactorKind { Controller, Model, Reward, View };

inline const char* to_string(FactorKind k) {
    switch (k) {
        case FactorKind::Controller: return "controller";
        case FactorKind::Model: return "model";
        case FactorKind::Reward: return "reward";
        case FactorKind::View: return "view";
    }
    return "?";
}

inline const char* to_string(ShapeKind k) {
    switch (k) {
        case ShapeKind::Rect: return "rect";
        case ShapeKind::Circle: return "circle";
        case ShapeKind::Text: return "text";
    }
    return "?";
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    enum class Kind {
        Number,     // number
        BoolLit,    // bval
        Ident,      // name (unresolved; gone after validation)
        VecIndex,   // name [ a ]; index -> var slot after resolution
        ActionCur,  // the `action` keyword
        Var,        // name, index = variable slot
        Local,      // name, index = let slot
        EnumConst,  // name = label, index = value ordinal
        ActionTok,  // name = token, index = action ordinal
        Unary,      // un, a
        Binary,     // bin, a, b
        If,         // a ? b : c  (cond, then, else)
        Let,        // name/index = binding slot, a = value, b = body
        Call,       // builtin, args
    };

    Kind kind = Kind::Number;
    Span span;
    double number = 0;
    bool bval = false;
    std::string name;
    int index = -1;
    UnOp un = UnOp::Neg;
    BinOp bin = BinOp::Add;
    Builtin builtin = Builtin::Abs;
    ExprPtr a, b, c;
    std::vector<ExprPtr> args;
};

inline ExprPtr make_number(double v, Span s = {}) {
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Number;
    e->number = v;
    e->span = s;
    return e;
}

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;
using Block = std::vector<StmtPtr>;

struct Stmt {
    enum class Kind { Assign, Increment, If, Let, Emit };

    Kind kind = Kind::Assign;
    Span span;
    // Assign / Increment
    std::string target;
    int target_index = -1;  // variable slot after resolution
    ExprPtr elem;           // optional vector element index
    ExprPtr value;          // also Let value
    // If
    ExprPtr cond;
    Block then_body;
    Block else_body;
    // Let
    std::string let_name;
    int let_slot = -1;
    // Emit
    ShapeKind shape = ShapeKind::Rect;
    std::vector<ExprPtr> args;
    std::string color_name;
    int color = -1;
    std::string text;
};

// ---------------------------------------------------------------------------
// Variable domains.

enum class DomainKind { Bool, Int, Real, Enum, Vec };

struct Domain {
    DomainKind kind = DomainKind::Bool;
    double lo = 0, hi = 0;                // Int / Real / Vec bounds
    std::vector<std::string> labels;      // Enum
    int size = 0;                         // Vec length

    bool finite() const {
        switch (kind) {
            case DomainKind::Bool:
            case DomainKind::Int:
            case DomainKind::Enum: return true;
            case DomainKind::Real:
            case DomainKind::Vec: return false;
        }
        return false;
    }
    // Number of distinct values; only valid for finite domains.
    long long cardinality() const {
        switch (kind) {
            case DomainKind::Bool: return 2;
            case DomainKind::Int: return static_cast<long long>(hi - lo) + 1;
            case DomainKind::Enum: return static_cast<long long>(labels.size());
            default: return -1;
        }
    }
};

enum class InitKind { Point, Uniform, Categorical };

// Parsed (not yet checked) init clause. Entries are number/label pairs kept
// parallel: labels[i] empty means numbers[i] holds the literal, otherwise
// labels[i] is an enum label awaiting resolution.
struct InitAst {
    InitKind kind = InitKind::Point;
    Span span;
    bool is_vec = false;  // point init given as a tuple
    std::vector<double> numbers;
    std::vector<std::string> labels;
    std::vector<double> weights;  // Categorical only
};

struct Metadata {
    std::string name;
    std::string description;
};

namespace ast {

struct VarDecl {
    std::string id;
    std::string label;  // optional human-readable name; empty = use id
    Domain domain;
    InitAst init;
    Span span;
};

// A factor as parsed; body still carries Ident leaves.
struct FactorDraft {
    std::string id;
    FactorKind kind = FactorKind::Model;
    std::vector<std::string> scope;
    std::vector<std::string> targets;
    bool has_targets = false;
    Block body;
    Span span;
};

struct Program {
    Metadata meta;
    std::vector<std::string> actions;
    bool has_actions = false;
    Span actions_span;
    std::vector<VarDecl> vars;
    std::vector<FactorDraft> factors;
    std::string score_id;
    bool has_score = false;
    Span score_span;
    long long max_steps = -1;
    bool has_max_steps = false;
    Span max_steps_span;
};

}  // namespace ast

// Drawing palette: 16 named colors, index = palette value.
inline const std::vector<std::string>& palette_names() {
    static const std::vector<std::string> names = {
        "black", "white",   "gray",  "silver", "red",    "green", "blue", "yellow",
        "cyan",  "magenta", "orange", "purple", "brown",  "pink",  "navy", "teal"};
    return names;
}

inline int palette_index(const std::string& name) {
    const auto& names = palette_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

}  // namespace fsim
