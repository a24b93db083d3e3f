#pragma once

#include <charconv>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dagdiff/errors.hpp"
#include "dagdiff/expr.hpp"

namespace dagdiff {

// Expression syntax tree. Programs keep expressions in this form because a
// loop body is lowered to DAG nodes once per iteration, not once per parse.
struct ExprAst {
    enum class Kind : std::uint8_t { Number, Name, Unary, Binary };

    Kind kind;
    double number = 0.0;           // Number
    std::string name;              // Name
    Op op = Op::Add;               // Unary / Binary (Pow counts as unary)
    int exponent = 0;              // Pow
    std::unique_ptr<ExprAst> a, b;
};

using ExprAstPtr = std::unique_ptr<ExprAst>;

enum class CmpOp : std::uint8_t { Lt, Le, Gt, Ge, Eq, Ne };

inline const char* cmp_op_name(CmpOp op) {
    switch (op) {
        case CmpOp::Lt: return "<";
        case CmpOp::Le: return "<=";
        case CmpOp::Gt: return ">";
        case CmpOp::Ge: return ">=";
        case CmpOp::Eq: return "==";
        case CmpOp::Ne: return "!=";
    }
    return "?";
}

using StmtId = std::uint32_t;

struct Stmt {
    enum class Kind : std::uint8_t { Assign, If, While, Return };

    Kind kind;
    StmtId id = 0;  // dense, preorder; branch decisions refer to these
    int line = 0;
    int col = 0;
    std::string name;       // Assign target
    ExprAstPtr expr;        // Assign / Return value
    CmpOp cmp = CmpOp::Lt;  // If / While condition
    ExprAstPtr lhs, rhs;
    std::vector<Stmt> body;       // If-then / While body
    std::vector<Stmt> else_body;  // If only
};

struct Program {
    std::vector<std::string> params;  // inferred: read but never assigned
    std::vector<Stmt> statements;
    std::uint32_t statement_count = 0;  // including nested statements
};

namespace detail {

enum class TokKind : std::uint8_t {
    Number, Ident, Plus, Minus, Star, Slash, Caret,
    LParen, RParen, LBrace, RBrace, Assign,
    Lt, Le, Gt, Ge, EqEq, Ne, Sep, End,
};

struct Token {
    TokKind kind;
    double number = 0.0;
    std::string text;
    int line = 1;
    int col = 1;
};

inline std::vector<Token> lex(std::string_view text) {
    std::vector<Token> toks;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto push = [&](TokKind k, std::string t = {}, double v = 0.0) {
        toks.push_back(Token{k, v, std::move(t), line, col});
    };
    while (i < text.size()) {
        char c = text[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            ++col;
            continue;
        }
        if (c == '\n') {
            push(TokKind::Sep, "\n");
            ++i;
            ++line;
            col = 1;
            continue;
        }
        if (c == ';') {
            push(TokKind::Sep, ";");
            ++i;
            ++col;
            continue;
        }
        if ((c >= '0' && c <= '9') || (c == '.' && i + 1 < text.size() && text[i + 1] >= '0' &&
                                       text[i + 1] <= '9')) {
            std::size_t start = i;
            while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
            if (i < text.size() && text[i] == '.') {
                ++i;
                while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
            }
            if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
                std::size_t mark = i;
                ++i;
                if (i < text.size() && (text[i] == '+' || text[i] == '-')) ++i;
                if (i < text.size() && text[i] >= '0' && text[i] <= '9') {
                    while (i < text.size() && text[i] >= '0' && text[i] <= '9') ++i;
                } else {
                    i = mark;  // 'e' belongs to a following identifier
                }
            }
            double value = 0.0;
            auto [p, ec] = std::from_chars(text.data() + start, text.data() + i, value);
            if (ec != std::errc() || p != text.data() + i)
                throw SyntaxError("bad numeric literal", line, col);
            push(TokKind::Number, std::string(text.substr(start, i - start)), value);
            col += static_cast<int>(i - start);
            continue;
        }
        if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') {
            std::size_t start = i;
            while (i < text.size() &&
                   ((text[i] >= 'a' && text[i] <= 'z') || (text[i] >= 'A' && text[i] <= 'Z') ||
                    (text[i] >= '0' && text[i] <= '9') || text[i] == '_'))
                ++i;
            push(TokKind::Ident, std::string(text.substr(start, i - start)));
            col += static_cast<int>(i - start);
            continue;
        }
        auto two = [&](char second) { return i + 1 < text.size() && text[i + 1] == second; };
        switch (c) {
            case '+': push(TokKind::Plus, "+"); break;
            case '-': push(TokKind::Minus, "-"); break;
            case '*': push(TokKind::Star, "*"); break;
            case '/': push(TokKind::Slash, "/"); break;
            case '^': push(TokKind::Caret, "^"); break;
            case '(': push(TokKind::LParen, "("); break;
            case ')': push(TokKind::RParen, ")"); break;
            case '{': push(TokKind::LBrace, "{"); break;
            case '}': push(TokKind::RBrace, "}"); break;
            case '<':
                if (two('=')) { push(TokKind::Le, "<="); ++i; ++col; }
                else push(TokKind::Lt, "<");
                break;
            case '>':
                if (two('=')) { push(TokKind::Ge, ">="); ++i; ++col; }
                else push(TokKind::Gt, ">");
                break;
            case '=':
                if (two('=')) { push(TokKind::EqEq, "=="); ++i; ++col; }
                else push(TokKind::Assign, "=");
                break;
            case '!':
                if (two('=')) { push(TokKind::Ne, "!="); ++i; ++col; }
                else throw SyntaxError("unexpected character '!'", line, col);
                break;
            default:
                throw SyntaxError(std::string("unexpected character '") + c + "'", line, col);
        }
        ++i;
        ++col;
    }
    toks.push_back(Token{TokKind::End, 0.0, "", line, col});
    return toks;
}

inline bool is_function_name(const std::string& s) {
    return s == "sin" || s == "cos" || s == "exp" || s == "ln" || s == "sqrt";
}

inline Op function_op(const std::string& s) {
    if (s == "sin") return Op::Sin;
    if (s == "cos") return Op::Cos;
    if (s == "exp") return Op::Exp;
    if (s == "ln") return Op::Ln;
    return Op::Sqrt;
}

struct Parser {
    const std::vector<Token>& toks;
    std::size_t pos = 0;

    const Token& peek() const { return toks[pos]; }
    const Token& get() { return toks[pos + 1 < toks.size() ? pos++ : pos]; }
    bool at(TokKind k) const { return toks[pos].kind == k; }

    [[noreturn]] void fail(const std::string& msg) const {
        const Token& t = peek();
        throw SyntaxError(msg, t.line, t.col);
    }

    void expect(TokKind k, const char* what) {
        if (!at(k)) fail(std::string("expected ") + what);
        get();
    }

    void skip_seps() {
        while (at(TokKind::Sep)) get();
    }

    // expr := term (('+'|'-') term)*
    ExprAstPtr expr() {
        ExprAstPtr left = term();
        while (at(TokKind::Plus) || at(TokKind::Minus)) {
            Op op = get().kind == TokKind::Plus ? Op::Add : Op::Sub;
            ExprAstPtr right = term();
            auto node = std::make_unique<ExprAst>();
            node->kind = ExprAst::Kind::Binary;
            node->op = op;
            node->a = std::move(left);
            node->b = std::move(right);
            left = std::move(node);
        }
        return left;
    }

    // term := factor (('*'|'/') factor)*
    ExprAstPtr term() {
        ExprAstPtr left = factor();
        while (at(TokKind::Star) || at(TokKind::Slash)) {
            Op op = get().kind == TokKind::Star ? Op::Mul : Op::Div;
            ExprAstPtr right = factor();
            auto node = std::make_unique<ExprAst>();
            node->kind = ExprAst::Kind::Binary;
            node->op = op;
            node->a = std::move(left);
            node->b = std::move(right);
            left = std::move(node);
        }
        return left;
    }

    // factor := '-' factor | atom ('^' integer)?
    // A minus directly on a numeric literal folds into the literal so that
    // printed negative constants reparse to the same node.
    ExprAstPtr factor() {
        if (at(TokKind::Minus)) {
            get();
            // A literal right after the minus reads as one negative number.
            // Not when '^' follows: -3^2 negates the power. And not through
            // parentheses: -(3) stays a negation node.
            if (at(TokKind::Number) &&
                !(pos + 1 < toks.size() && toks[pos + 1].kind == TokKind::Caret)) {
                const Token& t = get();
                auto lit = std::make_unique<ExprAst>();
                lit->kind = ExprAst::Kind::Number;
                lit->number = -t.number;
                return lit;
            }
            auto node = std::make_unique<ExprAst>();
            node->kind = ExprAst::Kind::Unary;
            node->op = Op::Neg;
            node->a = factor();
            return node;
        }
        ExprAstPtr base = atom();
        if (at(TokKind::Caret)) {
            get();
            bool negative = false;
            if (at(TokKind::Minus)) {
                get();
                negative = true;
            }
            if (!at(TokKind::Number)) fail("expected integer exponent after '^'");
            const Token& t = get();
            double v = t.number;
            if (v != static_cast<double>(static_cast<long long>(v)) || t.text.find('.') != std::string::npos ||
                t.text.find('e') != std::string::npos || t.text.find('E') != std::string::npos)
                throw SyntaxError("exponent must be an integer literal", t.line, t.col);
            long long k = static_cast<long long>(v);
            if (k > 1000000 || k < -1000000) throw SyntaxError("exponent out of range", t.line, t.col);
            auto node = std::make_unique<ExprAst>();
            node->kind = ExprAst::Kind::Unary;
            node->op = Op::Pow;
            node->exponent = static_cast<int>(negative ? -k : k);
            node->a = std::move(base);
            return node;
        }
        return base;
    }

    // atom := number | ident | ident '(' expr ')' | '(' expr ')'
    ExprAstPtr atom() {
        if (at(TokKind::Number)) {
            const Token& t = get();
            auto node = std::make_unique<ExprAst>();
            node->kind = ExprAst::Kind::Number;
            node->number = t.number;
            return node;
        }
        if (at(TokKind::Ident)) {
            const Token& t = get();
            if (at(TokKind::LParen)) {
                if (!is_function_name(t.text))
                    throw SyntaxError("unknown function '" + t.text + "'", t.line, t.col);
                get();
                ExprAstPtr arg = expr();
                expect(TokKind::RParen, "')'");
                auto node = std::make_unique<ExprAst>();
                node->kind = ExprAst::Kind::Unary;
                node->op = function_op(t.text);
                node->a = std::move(arg);
                return node;
            }
            auto node = std::make_unique<ExprAst>();
            node->kind = ExprAst::Kind::Name;
            node->name = t.text;
            return node;
        }
        if (at(TokKind::LParen)) {
            get();
            ExprAstPtr inner = expr();
            expect(TokKind::RParen, "')'");
            return inner;
        }
        fail("expected expression");
    }

    CmpOp comparison() {
        switch (peek().kind) {
            case TokKind::Lt: get(); return CmpOp::Lt;
            case TokKind::Le: get(); return CmpOp::Le;
            case TokKind::Gt: get(); return CmpOp::Gt;
            case TokKind::Ge: get(); return CmpOp::Ge;
            case TokKind::EqEq: get(); return CmpOp::Eq;
            case TokKind::Ne: get(); return CmpOp::Ne;
            default: fail("expected comparison operator");
        }
    }

    void end_of_statement() {
        if (!at(TokKind::Sep) && !at(TokKind::RBrace) && !at(TokKind::End))
            fail("expected end of statement");
    }

    Stmt statement(StmtId& next_id) {
        if (!at(TokKind::Ident)) fail("expected statement");
        const Token& t = peek();
        Stmt s;
        s.id = next_id++;
        s.line = t.line;
        s.col = t.col;
        if (t.text == "if" || t.text == "while") {
            bool is_if = t.text == "if";
            get();
            s.kind = is_if ? Stmt::Kind::If : Stmt::Kind::While;
            s.lhs = expr();
            s.cmp = comparison();
            s.rhs = expr();
            s.body = block(next_id);
            if (is_if) {
                std::size_t mark = pos;
                skip_seps();
                if (at(TokKind::Ident) && peek().text == "else") {
                    get();
                    s.else_body = block(next_id);
                } else {
                    pos = mark;
                }
            }
            return s;
        }
        if (t.text == "return") {
            get();
            s.kind = Stmt::Kind::Return;
            s.expr = expr();
            end_of_statement();
            return s;
        }
        if (t.text == "else") fail("unexpected 'else'");
        get();
        s.kind = Stmt::Kind::Assign;
        s.name = t.text;
        expect(TokKind::Assign, "'='");
        s.expr = expr();
        end_of_statement();
        return s;
    }

    std::vector<Stmt> block(StmtId& next_id) {
        skip_seps();
        expect(TokKind::LBrace, "'{'");
        std::vector<Stmt> stmts;
        for (;;) {
            skip_seps();
            if (at(TokKind::RBrace)) {
                get();
                return stmts;
            }
            if (at(TokKind::End)) fail("expected '}'");
            stmts.push_back(statement(next_id));
        }
    }
};

// Definite-assignment walk. Locals are names assigned anywhere; every other
// name read is a parameter (collected in first-read order). Reading a local
// that is not yet assigned on every path to the read is an error.
struct FlowChecker {
    std::set<std::string> locals;
    std::vector<std::string> params;
    std::set<std::string> seen_params;

    void collect_assigned(const std::vector<Stmt>& stmts) {
        for (const Stmt& s : stmts) {
            if (s.kind == Stmt::Kind::Assign) locals.insert(s.name);
            collect_assigned(s.body);
            collect_assigned(s.else_body);
        }
    }

    void check_reads(const ExprAst& ast, const std::set<std::string>& assigned, const Stmt& at) {
        if (ast.kind == ExprAst::Kind::Name) {
            if (locals.count(ast.name)) {
                if (!assigned.count(ast.name))
                    throw SyntaxError("variable '" + ast.name +
                                          "' used before assignment on all paths",
                                      at.line, at.col);
            } else if (seen_params.insert(ast.name).second) {
                params.push_back(ast.name);
            }
            return;
        }
        if (ast.a) check_reads(*ast.a, assigned, at);
        if (ast.b) check_reads(*ast.b, assigned, at);
    }

    std::set<std::string> walk(const std::vector<Stmt>& stmts, std::set<std::string> assigned) {
        for (const Stmt& s : stmts) {
            switch (s.kind) {
                case Stmt::Kind::Assign:
                    check_reads(*s.expr, assigned, s);
                    assigned.insert(s.name);
                    break;
                case Stmt::Kind::Return:
                    check_reads(*s.expr, assigned, s);
                    break;
                case Stmt::Kind::If: {
                    check_reads(*s.lhs, assigned, s);
                    check_reads(*s.rhs, assigned, s);
                    std::set<std::string> then_set = walk(s.body, assigned);
                    std::set<std::string> else_set = walk(s.else_body, assigned);
                    std::set<std::string> both;
                    for (const std::string& n : then_set)
                        if (else_set.count(n)) both.insert(n);
                    assigned = std::move(both);
                    break;
                }
                case Stmt::Kind::While:
                    check_reads(*s.lhs, assigned, s);
                    check_reads(*s.rhs, assigned, s);
                    // The body may not run at all, so its assignments do not
                    // become definite.
                    walk(s.body, assigned);
                    break;
            }
        }
        return assigned;
    }
};

inline void forbid_nested_return(const std::vector<Stmt>& stmts) {
    for (const Stmt& s : stmts) {
        if (s.kind == Stmt::Kind::Return)
            throw SyntaxError("'return' is only allowed as the final top-level statement", s.line,
                              s.col);
        forbid_nested_return(s.body);
        forbid_nested_return(s.else_body);
    }
}

}  // namespace detail

// Lowers a syntax tree into a store. `resolve` maps a free name to the node
// standing for it (a Var node when parsing, the bound node when tracing).
template <typename Resolver>
NodeId lower_expr(ExprStore& store, const ExprAst& ast, Resolver&& resolve) {
    switch (ast.kind) {
        case ExprAst::Kind::Number:
            return store.constant(ast.number);
        case ExprAst::Kind::Name:
            return resolve(ast.name);
        case ExprAst::Kind::Unary: {
            NodeId child = lower_expr(store, *ast.a, resolve);
            if (ast.op == Op::Pow) return store.pow(child, ast.exponent);
            return store.unary(ast.op, child);
        }
        case ExprAst::Kind::Binary: {
            NodeId left = lower_expr(store, *ast.a, resolve);
            NodeId right = lower_expr(store, *ast.b, resolve);
            return store.binary(ast.op, left, right);
        }
    }
    throw StructuralError("corrupt syntax tree");
}

struct ParsedExpr {
    ExprStore store;
    NodeId root = kInvalidNode;
};

// Parses one expression into a fresh hash-consed store; textually repeated
// subexpressions come out shared. Free identifiers become variables in
// first-appearance order unless `params` pre-registers an order.
inline ParsedExpr parse_expr(std::string_view text,
                             const std::vector<std::string>& params = {}) {
    std::vector<detail::Token> all = detail::lex(text);
    std::vector<detail::Token> toks;
    toks.reserve(all.size());
    for (detail::Token& t : all)
        if (t.kind != detail::TokKind::Sep) toks.push_back(std::move(t));
    detail::Parser p{toks};
    ExprAstPtr ast = p.expr();
    if (!p.at(detail::TokKind::End)) p.fail("unexpected trailing input");

    ParsedExpr result;
    for (const std::string& name : params) result.store.make_var(name);
    result.root =
        lower_expr(result.store, *ast, [&](const std::string& name) { return result.store.var(name); });
    result.store.push_root(result.root);
    return result;
}

// Parses a program: statements separated by newlines or ';', with
// `name = expr`, `if cond { ... } else { ... }`, `while cond { ... }`, and a
// single final top-level `return expr`. No evaluation happens here.
inline Program parse_program(std::string_view text) {
    std::vector<detail::Token> toks = detail::lex(text);
    detail::Parser p{toks};
    Program prog;
    StmtId next_id = 0;
    for (;;) {
        p.skip_seps();
        if (p.at(detail::TokKind::End)) break;
        prog.statements.push_back(p.statement(next_id));
    }
    prog.statement_count = next_id;

    if (prog.statements.empty()) throw SyntaxError("empty program", 1, 1);
    std::size_t returns = 0;
    for (const Stmt& s : prog.statements)
        if (s.kind == Stmt::Kind::Return) ++returns;
    const Stmt& last = prog.statements.back();
    if (returns != 1 || last.kind != Stmt::Kind::Return)
        throw SyntaxError("program must end with exactly one top-level 'return'", last.line,
                          last.col);
    for (const Stmt& s : prog.statements) {
        detail::forbid_nested_return(s.body);
        detail::forbid_nested_return(s.else_body);
    }

    detail::FlowChecker flow;
    flow.collect_assigned(prog.statements);
    flow.walk(prog.statements, {});
    prog.params = std::move(flow.params);
    return prog;
}

}  // namespace dagdiff
