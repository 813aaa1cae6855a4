#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "fsim/ast.hpp"
#include "fsim/diag.hpp"

namespace fsim {

// ---------------------------------------------------------------------------
// Tokenizer. Total on arbitrary bytes: unknown characters become Error
// tokens, never exceptions. Newlines are recorded on the following token so
// identifier lists (actions, scope, targets) know where to stop.

struct Token {
    enum class Kind { End, Ident, Number, String, Punct, Error };
    Kind kind = Kind::End;
    std::string text;
    double num = 0;
    Span span;
    bool newline_before = false;
};

namespace detail {

inline bool ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
inline bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool digit(char c) { return c >= '0' && c <= '9'; }

struct Lexer {
    const std::string& src;
    std::size_t pos = 0;
    std::uint32_t line = 1, col = 1;
    bool pending_newline = false;
    std::vector<Diagnostic> diags;

    explicit Lexer(const std::string& s) : src(s) {}

    Span here(std::size_t len = 1) const {
        return {static_cast<std::uint32_t>(pos), static_cast<std::uint32_t>(len), line, col};
    }
    char peek(std::size_t k = 0) const {
        return pos + k < src.size() ? src[pos + k] : '\0';
    }
    void advance() {
        if (pos >= src.size()) return;
        if (src[pos] == '\n') {
            ++line;
            col = 1;
            pending_newline = true;
        } else {
            ++col;
        }
        ++pos;
    }

    void skip_trivia() {
        while (pos < src.size()) {
            char c = src[pos];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                advance();
            } else if (c == '#') {
                while (pos < src.size() && src[pos] != '\n') advance();
            } else {
                break;
            }
        }
    }

    Token next() {
        skip_trivia();
        Token t;
        t.newline_before = pending_newline;
        pending_newline = false;
        t.span = here(0);
        if (pos >= src.size()) {
            t.kind = Token::Kind::End;
            return t;
        }
        char c = src[pos];
        std::size_t start = pos;
        if (ident_start(c)) {
            while (pos < src.size() && ident_char(src[pos])) advance();
            t.kind = Token::Kind::Ident;
            t.text = src.substr(start, pos - start);
        } else if (digit(c) || (c == '.' && digit(peek(1)))) {
            lex_number(t, start);
        } else if (c == '"') {
            lex_string(t, start);
        } else {
            lex_punct(t, start);
        }
        t.span.length = static_cast<std::uint32_t>(pos - start);
        return t;
    }

    void lex_number(Token& t, std::size_t start) {
        while (pos < src.size() && digit(src[pos])) advance();
        if (peek() == '.' && digit(peek(1))) {
            advance();
            while (pos < src.size() && digit(src[pos])) advance();
        }
        bool bad = false;
        if (peek() == 'e' || peek() == 'E') {
            advance();
            if (peek() == '+' || peek() == '-') advance();
            if (!digit(peek())) bad = true;
            while (pos < src.size() && digit(src[pos])) advance();
        }
        // a number immediately followed by identifier chars is malformed
        if (pos < src.size() && ident_char(src[pos])) {
            bad = true;
            while (pos < src.size() && ident_char(src[pos])) advance();
        }
        std::string text = src.substr(start, pos - start);
        if (bad) {
            t.kind = Token::Kind::Error;
            t.text = text;
            diags.push_back({Severity::Error, DiagCode::InvalidNumber,
                             "malformed number '" + text + "'", t.span});
            return;
        }
        t.kind = Token::Kind::Number;
        t.text = text;
        t.num = std::strtod(text.c_str(), nullptr);
    }

    void lex_string(Token& t, std::size_t start) {
        advance();  // opening quote
        std::string out;
        while (pos < src.size() && src[pos] != '"' && src[pos] != '\n') {
            char c = src[pos];
            if (c == '\\' && pos + 1 < src.size()) {
                advance();
                char e = src[pos];
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: out += e; break;
                }
                advance();
            } else {
                out += c;
                advance();
            }
        }
        if (pos >= src.size() || src[pos] != '"') {
            t.kind = Token::Kind::Error;
            t.text = src.substr(start, pos - start);
            diags.push_back(
                {Severity::Error, DiagCode::UnterminatedString, "unterminated string", t.span});
            return;
        }
        advance();  // closing quote
        t.kind = Token::Kind::String;
        t.text = out;
    }

    void lex_punct(Token& t, std::size_t start) {
        static const char* two_char[] = {":=", "+=", "==", "!=", "<=", ">="};
        for (const char* p : two_char) {
            if (peek() == p[0] && peek(1) == p[1]) {
                advance();
                advance();
                t.kind = Token::Kind::Punct;
                t.text = p;
                return;
            }
        }
        char c = src[pos];
        switch (c) {
            case '+': case '-': case '*': case '/': case '(': case ')':
            case '{': case '}': case '[': case ']': case ',': case ':':
            case '<': case '>': case '=':
                advance();
                t.kind = Token::Kind::Punct;
                t.text = std::string(1, c);
                return;
            default: break;
        }
        advance();
        t.kind = Token::Kind::Error;
        t.text = src.substr(start, pos - start);
        diags.push_back({Severity::Error, DiagCode::UnexpectedToken,
                         "unexpected character '" + t.text + "'", t.span});
    }
};

inline std::vector<Token> tokenize(const std::string& src, std::vector<Diagnostic>& diags) {
    Lexer lex(src);
    std::vector<Token> toks;
    for (;;) {
        Token t = lex.next();
        bool end = t.kind == Token::Kind::End;
        toks.push_back(std::move(t));
        if (end) break;
    }
    diags.insert(diags.end(), lex.diags.begin(), lex.diags.end());
    return toks;
}

}  // namespace detail

struct ParseResult {
    ast::Program program;
    std::vector<Diagnostic> diags;
    bool ok() const { return !has_errors(diags); }
};

namespace detail {

constexpr int kMaxNesting = 200;
constexpr std::size_t kMaxParseDiags = 25;

struct ParseBail {};

inline bool is_top_keyword(const std::string& s) {
    return s == "name" || s == "description" || s == "actions" || s == "score" ||
           s == "max_steps" || s == "var" || s == "controller" || s == "model" ||
           s == "reward" || s == "view";
}

struct Parser {
    const std::vector<Token>& toks;
    std::size_t pos = 0;
    int depth = 0;
    std::vector<Diagnostic>& diags;
    ast::Program& prog;

    Parser(const std::vector<Token>& t, std::vector<Diagnostic>& d, ast::Program& p)
        : toks(t), diags(d), prog(p) {}

    const Token& cur() const { return toks[pos]; }
    const Token& ahead(std::size_t k) const {
        return toks[std::min(pos + k, toks.size() - 1)];
    }
    bool at_end() const { return cur().kind == Token::Kind::End; }
    void bump() {
        if (!at_end()) ++pos;
    }

    [[noreturn]] void fail(DiagCode code, const std::string& msg, Span span) {
        if (diags.size() < kMaxParseDiags) diags.push_back({Severity::Error, code, msg, span});
        throw ParseBail{};
    }
    [[noreturn]] void unexpected(const std::string& wanted) {
        const Token& t = cur();
        if (t.kind == Token::Kind::End)
            fail(DiagCode::UnexpectedEnd, "unexpected end of input; expected " + wanted, t.span);
        std::string got = t.kind == Token::Kind::String ? "string" : "'" + t.text + "'";
        fail(DiagCode::UnexpectedToken, "expected " + wanted + ", found " + got, t.span);
    }

    bool is_punct(const char* p) const {
        return cur().kind == Token::Kind::Punct && cur().text == p;
    }
    bool is_ident(const char* s) const {
        return cur().kind == Token::Kind::Ident && cur().text == s;
    }
    void expect_punct(const char* p) {
        if (!is_punct(p)) unexpected(std::string("'") + p + "'");
        bump();
    }
    std::string expect_ident(const char* what) {
        if (cur().kind != Token::Kind::Ident) unexpected(what);
        std::string s = cur().text;
        bump();
        return s;
    }
    std::string expect_string(const char* what) {
        if (cur().kind != Token::Kind::String) unexpected(what);
        std::string s = cur().text;
        bump();
        return s;
    }
    double expect_signed_number(const char* what) {
        bool neg = false;
        if (is_punct("-")) {
            neg = true;
            bump();
        }
        if (cur().kind != Token::Kind::Number) unexpected(what);
        double v = cur().num;
        bump();
        return neg ? -v : v;
    }

    struct DepthGuard {
        Parser& p;
        explicit DepthGuard(Parser& parser) : p(parser) {
            if (++p.depth > kMaxNesting)
                p.fail(DiagCode::NestingTooDeep, "nesting exceeds the parser limit",
                       p.cur().span);
        }
        ~DepthGuard() { --p.depth; }
    };

    // ---- expressions ----

    ExprPtr parse_expr() {
        DepthGuard guard(*this);
        if (is_ident("if")) return parse_if_expr();
        if (is_ident("let") && ahead(1).kind == Token::Kind::Ident &&
            ahead(2).kind == Token::Kind::Punct && ahead(2).text == "=")
            return parse_let_expr();
        return parse_or();
    }

    ExprPtr parse_if_expr() {
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::If;
        e->span = cur().span;
        bump();  // if
        e->a = parse_expr();
        if (!is_ident("then")) unexpected("'then'");
        bump();
        e->b = parse_expr();
        if (!is_ident("else")) unexpected("'else'");
        bump();
        e->c = parse_expr();
        return e;
    }

    ExprPtr parse_let_expr() {
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Let;
        e->span = cur().span;
        bump();  // let
        e->name = expect_ident("binding name");
        expect_punct("=");
        e->a = parse_expr();
        if (!is_ident("in")) unexpected("'in'");
        bump();
        e->b = parse_expr();
        return e;
    }

    ExprPtr binary(BinOp op, ExprPtr lhs, ExprPtr rhs, Span span) {
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Binary;
        e->bin = op;
        e->a = std::move(lhs);
        e->b = std::move(rhs);
        e->span = span;
        return e;
    }

    ExprPtr parse_or() {
        ExprPtr lhs = parse_and();
        while (is_ident("or")) {
            Span s = cur().span;
            bump();
            lhs = binary(BinOp::Or, lhs, parse_and(), s);
        }
        return lhs;
    }
    ExprPtr parse_and() {
        ExprPtr lhs = parse_not();
        while (is_ident("and")) {
            Span s = cur().span;
            bump();
            lhs = binary(BinOp::And, lhs, parse_not(), s);
        }
        return lhs;
    }
    ExprPtr parse_not() {
        DepthGuard guard(*this);
        if (is_ident("not")) {
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Kind::Unary;
            e->un = UnOp::Not;
            e->span = cur().span;
            bump();
            e->a = parse_not();
            return e;
        }
        return parse_cmp();
    }
    ExprPtr parse_cmp() {
        ExprPtr lhs = parse_add();
        struct {
            const char* text;
            BinOp op;
        } static const ops[] = {{"==", BinOp::Eq}, {"!=", BinOp::Ne}, {"<=", BinOp::Le},
                                {">=", BinOp::Ge}, {"<", BinOp::Lt},  {">", BinOp::Gt}};
        for (const auto& o : ops) {
            if (is_punct(o.text)) {
                Span s = cur().span;
                bump();
                return binary(o.op, lhs, parse_add(), s);
            }
        }
        return lhs;
    }
    ExprPtr parse_add() {
        ExprPtr lhs = parse_mul();
        for (;;) {
            if (is_punct("+")) {
                Span s = cur().span;
                bump();
                lhs = binary(BinOp::Add, lhs, parse_mul(), s);
            } else if (is_punct("-")) {
                Span s = cur().span;
                bump();
                lhs = binary(BinOp::Sub, lhs, parse_mul(), s);
            } else {
                return lhs;
            }
        }
    }
    ExprPtr parse_mul() {
        ExprPtr lhs = parse_unary();
        for (;;) {
            if (is_punct("*")) {
                Span s = cur().span;
                bump();
                lhs = binary(BinOp::Mul, lhs, parse_unary(), s);
            } else if (is_punct("/")) {
                Span s = cur().span;
                bump();
                lhs = binary(BinOp::Div, lhs, parse_unary(), s);
            } else {
                return lhs;
            }
        }
    }
    ExprPtr parse_unary() {
        DepthGuard guard(*this);
        if (is_punct("-")) {
            Span s = cur().span;
            bump();
            ExprPtr operand = parse_unary();
            // negative literals are literals, keeping formatting involutive
            if (operand->kind == Expr::Kind::Number)
                return make_number(-operand->number, s);
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Kind::Unary;
            e->un = UnOp::Neg;
            e->span = s;
            e->a = operand;
            return e;
        }
        return parse_postfix();
    }
    ExprPtr parse_postfix() {
        ExprPtr base = parse_primary();
        if (is_punct("[")) {
            if (base->kind != Expr::Kind::Ident)
                fail(DiagCode::UnexpectedToken, "only a variable can be indexed", cur().span);
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Kind::VecIndex;
            e->name = base->name;
            e->span = base->span;
            bump();
            e->a = parse_expr();
            expect_punct("]");
            return e;
        }
        return base;
    }

    ExprPtr parse_primary() {
        DepthGuard guard(*this);
        const Token& t = cur();
        if (t.kind == Token::Kind::Number) {
            ExprPtr e = make_number(t.num, t.span);
            bump();
            return e;
        }
        if (t.kind == Token::Kind::Ident) {
            if (t.text == "true" || t.text == "false") {
                auto e = std::make_shared<Expr>();
                e->kind = Expr::Kind::BoolLit;
                e->bval = t.text == "true";
                e->span = t.span;
                bump();
                return e;
            }
            if (t.text == "action") {
                auto e = std::make_shared<Expr>();
                e->kind = Expr::Kind::ActionCur;
                e->span = t.span;
                bump();
                return e;
            }
            if (ahead(1).kind == Token::Kind::Punct && ahead(1).text == "(")
                return parse_call();
            auto e = std::make_shared<Expr>();
            e->kind = Expr::Kind::Ident;
            e->name = t.text;
            e->span = t.span;
            bump();
            return e;
        }
        if (is_punct("(")) {
            bump();
            ExprPtr e = parse_expr();
            expect_punct(")");
            return e;
        }
        unexpected("an expression");
    }

    ExprPtr parse_call() {
        auto e = std::make_shared<Expr>();
        e->kind = Expr::Kind::Call;
        e->span = cur().span;
        std::string fn = expect_ident("function name");
        struct {
            const char* name;
            Builtin b;
            int arity;  // -1 = one or more
        } static const table[] = {
            {"clamp", Builtin::Clamp, 3},        {"abs", Builtin::Abs, 1},
            {"min", Builtin::Min, 2},            {"max", Builtin::Max, 2},
            {"bernoulli", Builtin::Bernoulli, 1}, {"uniform_int", Builtin::UniformInt, 2},
            {"uniform_real", Builtin::UniformReal, 2}, {"categorical", Builtin::Categorical, -1},
        };
        int arity = 0;
        bool known = false;
        for (const auto& row : table) {
            if (fn == row.name) {
                e->builtin = row.b;
                arity = row.arity;
                known = true;
                break;
            }
        }
        if (!known)
            fail(DiagCode::UnknownFunction, "unknown function '" + fn + "'", e->span);
        expect_punct("(");
        if (!is_punct(")")) {
            e->args.push_back(parse_expr());
            while (is_punct(",")) {
                bump();
                e->args.push_back(parse_expr());
            }
        }
        expect_punct(")");
        if (arity >= 0 && static_cast<int>(e->args.size()) != arity)
            fail(DiagCode::BadArity,
                 "'" + fn + "' takes " + std::to_string(arity) + " argument(s), got " +
                     std::to_string(e->args.size()),
                 e->span);
        if (arity < 0 && e->args.empty())
            fail(DiagCode::BadArity, "'" + fn + "' needs at least one argument", e->span);
        return e;
    }

    // ---- statements ----

    Block parse_block() {
        DepthGuard guard(*this);
        expect_punct("{");
        Block body;
        while (!is_punct("}")) {
            if (at_end()) unexpected("'}'");
            body.push_back(parse_stmt());
        }
        bump();  // }
        return body;
    }

    StmtPtr parse_stmt() {
        DepthGuard guard(*this);
        auto s = std::make_shared<Stmt>();
        s->span = cur().span;
        if (is_ident("if")) {
            s->kind = Stmt::Kind::If;
            bump();
            s->cond = parse_expr();
            s->then_body = parse_block();
            if (is_ident("else")) {
                bump();
                if (is_ident("if")) {
                    s->else_body.push_back(parse_stmt());
                } else {
                    s->else_body = parse_block();
                }
            }
            return s;
        }
        if (is_ident("let")) {
            s->kind = Stmt::Kind::Let;
            bump();
            s->let_name = expect_ident("binding name");
            expect_punct("=");
            s->value = parse_expr();
            return s;
        }
        if (is_ident("rect") || is_ident("circle") || is_ident("text")) {
            return parse_emit(s);
        }
        if (cur().kind != Token::Kind::Ident) unexpected("a statement");
        s->target = cur().text;
        bump();
        if (is_punct("[")) {
            bump();
            s->elem = parse_expr();
            expect_punct("]");
        }
        if (is_punct(":=")) {
            s->kind = Stmt::Kind::Assign;
        } else if (is_punct("+=")) {
            s->kind = Stmt::Kind::Increment;
        } else {
            unexpected("':=' or '+='");
        }
        bump();
        s->value = parse_expr();
        return s;
    }

    StmtPtr parse_emit(std::shared_ptr<Stmt>& s) {
        s->kind = Stmt::Kind::Emit;
        std::string shape = cur().text;
        int positional = 0;
        if (shape == "rect") {
            s->shape = ShapeKind::Rect;
            positional = 4;  // x y w h
        } else if (shape == "circle") {
            s->shape = ShapeKind::Circle;
            positional = 3;  // x y r
        } else {
            s->shape = ShapeKind::Text;
            positional = 2;  // x y, then the string
        }
        bump();
        expect_punct("(");
        for (int i = 0; i < positional; ++i) {
            s->args.push_back(parse_expr());
            expect_punct(",");
        }
        if (s->shape == ShapeKind::Text) {
            s->text = expect_string("text literal");
            expect_punct(",");
        }
        s->color_name = expect_ident("a color name");
        expect_punct(")");
        return s;
    }

    // ---- declarations ----

    std::vector<std::string> parse_ident_list(const char* what) {
        std::vector<std::string> out;
        while (cur().kind == Token::Kind::Ident && !cur().newline_before) {
            out.push_back(cur().text);
            bump();
        }
        if (out.empty()) unexpected(what);
        return out;
    }

    Domain parse_domain() {
        Domain d;
        std::string kind = expect_ident("a domain (bool, int, real, enum, vec)");
        if (kind == "bool") {
            d.kind = DomainKind::Bool;
            return d;
        }
        if (kind == "int" || kind == "real") {
            d.kind = kind == "int" ? DomainKind::Int : DomainKind::Real;
            expect_punct("[");
            d.lo = expect_signed_number("lower bound");
            expect_punct(",");
            d.hi = expect_signed_number("upper bound");
            expect_punct("]");
            if (d.kind == DomainKind::Int) {
                d.lo = std::floor(d.lo);
                d.hi = std::floor(d.hi);
            }
            return d;
        }
        if (kind == "enum") {
            d.kind = DomainKind::Enum;
            expect_punct("{");
            d.labels.push_back(expect_ident("enum label"));
            while (is_punct(",")) {
                bump();
                d.labels.push_back(expect_ident("enum label"));
            }
            expect_punct("}");
            return d;
        }
        if (kind == "vec") {
            d.kind = DomainKind::Vec;
            expect_punct("(");
            d.size = static_cast<int>(expect_signed_number("vector length"));
            expect_punct(")");
            expect_punct("[");
            d.lo = expect_signed_number("lower bound");
            expect_punct(",");
            d.hi = expect_signed_number("upper bound");
            expect_punct("]");
            return d;
        }
        fail(DiagCode::UnexpectedToken, "unknown domain '" + kind + "'", cur().span);
    }

    // One number-or-label init entry appended to the parallel arrays.
    void parse_init_entry(InitAst& init) {
        if (cur().kind == Token::Kind::Ident) {
            if (cur().text == "true" || cur().text == "false") {
                init.numbers.push_back(cur().text == "true" ? 1 : 0);
                init.labels.push_back("");
            } else {
                init.numbers.push_back(0);
                init.labels.push_back(cur().text);
            }
            bump();
            return;
        }
        init.numbers.push_back(expect_signed_number("init value"));
        init.labels.push_back("");
    }

    InitAst parse_init() {
        InitAst init;
        init.span = cur().span;
        if (is_ident("uniform")) {
            init.kind = InitKind::Uniform;
            bump();
            return init;
        }
        if (is_ident("categorical")) {
            init.kind = InitKind::Categorical;
            bump();
            expect_punct("(");
            for (;;) {
                parse_init_entry(init);
                expect_punct(":");
                init.weights.push_back(expect_signed_number("weight"));
                if (is_punct(",")) {
                    bump();
                    continue;
                }
                break;
            }
            expect_punct(")");
            return init;
        }
        init.kind = InitKind::Point;
        if (is_punct("(")) {
            init.is_vec = true;
            bump();
            init.numbers.push_back(expect_signed_number("vector element"));
            init.labels.push_back("");
            while (is_punct(",")) {
                bump();
                init.numbers.push_back(expect_signed_number("vector element"));
                init.labels.push_back("");
            }
            expect_punct(")");
            return init;
        }
        parse_init_entry(init);
        return init;
    }

    void parse_var() {
        ast::VarDecl v;
        v.span = cur().span;
        bump();  // var
        v.id = expect_ident("variable id");
        expect_punct(":");
        v.domain = parse_domain();
        if (!is_ident("init")) unexpected("'init'");
        bump();
        v.init = parse_init();
        if (is_ident("label") && ahead(1).kind == Token::Kind::String) {
            bump();
            v.label = expect_string("label");
        }
        prog.vars.push_back(std::move(v));
    }

    void parse_factor(FactorKind kind) {
        ast::FactorDraft f;
        f.kind = kind;
        f.span = cur().span;
        bump();  // kind keyword
        f.id = expect_ident("factor id");
        expect_punct("{");
        if (is_ident("scope")) {
            bump();
            f.scope = parse_ident_list("scope variable ids");
        }
        if (is_ident("targets")) {
            bump();
            f.has_targets = true;
            f.targets = parse_ident_list("target variable ids");
        }
        while (!is_punct("}")) {
            if (at_end()) unexpected("'}'");
            f.body.push_back(parse_stmt());
        }
        bump();  // }
        prog.factors.push_back(std::move(f));
    }

    void parse_top() {
        const Token& t = cur();
        if (t.kind != Token::Kind::Ident) unexpected("a declaration");
        const std::string& kw = t.text;
        if (kw == "name") {
            bump();
            prog.meta.name = expect_string("simulation name");
        } else if (kw == "description") {
            bump();
            prog.meta.description = expect_string("description");
        } else if (kw == "actions") {
            if (prog.has_actions)
                fail(DiagCode::DuplicateDeclaration, "duplicate actions declaration", t.span);
            prog.has_actions = true;
            prog.actions_span = t.span;
            bump();
            prog.actions = parse_ident_list("action tokens");
        } else if (kw == "score") {
            if (prog.has_score)
                fail(DiagCode::DuplicateDeclaration, "duplicate score designation", t.span);
            prog.has_score = true;
            prog.score_span = t.span;
            bump();
            prog.score_id = expect_ident("score variable id");
        } else if (kw == "max_steps") {
            if (prog.has_max_steps)
                fail(DiagCode::DuplicateDeclaration, "duplicate max_steps declaration", t.span);
            prog.has_max_steps = true;
            prog.max_steps_span = t.span;
            bump();
            prog.max_steps = static_cast<long long>(expect_signed_number("step cap"));
        } else if (kw == "var") {
            parse_var();
        } else if (kw == "controller") {
            parse_factor(FactorKind::Controller);
        } else if (kw == "model") {
            parse_factor(FactorKind::Model);
        } else if (kw == "reward") {
            parse_factor(FactorKind::Reward);
        } else if (kw == "view") {
            parse_factor(FactorKind::View);
        } else {
            unexpected("a declaration");
        }
    }

    // Skip forward to a plausible next declaration after an error.
    void synchronize() {
        int brace_depth = 0;
        while (!at_end()) {
            if (is_punct("{")) {
                ++brace_depth;
            } else if (is_punct("}")) {
                if (brace_depth > 0) --brace_depth;
                bump();
                continue;
            } else if (brace_depth == 0 && cur().kind == Token::Kind::Ident &&
                       is_top_keyword(cur().text)) {
                return;
            }
            bump();
        }
    }

    void run() {
        while (!at_end()) {
            try {
                parse_top();
            } catch (const ParseBail&) {
                bump();
                synchronize();
            }
        }
    }
};

}  // namespace detail

// Parses source text into an AST. Never throws; all failures are reported as
// diagnostics with source spans.
inline ParseResult parse(const std::string& source) {
    ParseResult result;
    if (source.find_first_not_of(" \t\r\n") == std::string::npos) {
        result.diags.push_back({Severity::Error, DiagCode::MissingDeclaration,
                                "source contains no declarations", Span{0, 0, 1, 1}});
        return result;
    }
    std::vector<Diagnostic> lex_diags;
    std::vector<Token> toks = detail::tokenize(source, lex_diags);
    detail::Parser parser(toks, result.diags, result.program);
    parser.run();
    // lexer diagnostics follow parser ones only if the parser found nothing
    for (const auto& d : lex_diags) {
        bool dup = false;
        for (const auto& existing : result.diags)
            if (existing.span.offset == d.span.offset && existing.code == d.code) dup = true;
        if (!dup && result.diags.size() < detail::kMaxParseDiags) result.diags.push_back(d);
    }
    return result;
}

struct StatementsResult {
    Block block;
    std::vector<Diagnostic> diags;
    bool ok() const { return !has_errors(diags); }
};

// Parses a bare statement sequence (a factor body as carried by a patch).
inline StatementsResult parse_statements(const std::string& source) {
    StatementsResult result;
    std::vector<Diagnostic> lex_diags;
    std::vector<Token> toks = detail::tokenize(source, lex_diags);
    ast::Program scratch;
    detail::Parser parser(toks, result.diags, scratch);
    while (!parser.at_end()) {
        try {
            result.block.push_back(parser.parse_stmt());
        } catch (const detail::ParseBail&) {
            parser.bump();
        }
        if (result.diags.size() >= detail::kMaxParseDiags) break;
    }
    for (const auto& d : lex_diags)
        if (result.diags.size() < detail::kMaxParseDiags) result.diags.push_back(d);
    return result;
}

}  // namespace fsim
