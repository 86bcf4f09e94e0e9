#pragma once

#include "vizproxy/value.hpp"

#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vizproxy {

// ─── Lexer ───────────────────────────────────────────────────────────────
// Shared by the expression parser and the task mini-language.

enum class TokenKind { Ident, Number, String, Symbol, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    std::size_t line = 1;
    std::size_t column = 1;
};

class Lexer {
public:
    explicit Lexer(std::string_view src, std::size_t line = 1, std::size_t column = 1)
        : src_(src), line_(line), col_(column) {
        tokenize();
    }

    const Token& peek(std::size_t ahead = 0) const {
        return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
    }
    Token next() {
        Token t = peek();
        if (pos_ < toks_.size() - 1) ++pos_;
        return t;
    }
    bool atEnd() const { return peek().kind == TokenKind::End; }

    bool acceptSymbol(std::string_view s) {
        if (peek().kind == TokenKind::Symbol && peek().text == s) {
            next();
            return true;
        }
        return false;
    }
    bool acceptKeyword(std::string_view s) {
        if (peek().kind == TokenKind::Ident && peek().text == s) {
            next();
            return true;
        }
        return false;
    }
    void expectSymbol(std::string_view s) {
        if (!acceptSymbol(s)) error("expected '" + std::string(s) + "'");
    }
    std::string expectIdent(std::string_view what = "identifier") {
        if (peek().kind != TokenKind::Ident) error("expected " + std::string(what));
        return next().text;
    }

    [[noreturn]] void error(const std::string& msg) const {
        const auto& t = peek();
        std::string found = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
        fail(ErrorKind::Parse, "syntax error at line " + std::to_string(t.line) + ", column " +
                                   std::to_string(t.column) + ": " + msg + ", found " + found);
    }

private:
    void tokenize() {
        std::size_t i = 0;
        auto advance = [&](std::size_t n) {
            for (std::size_t k = 0; k < n; ++k, ++i) {
                if (src_[i] == '\n') {
                    ++line_;
                    col_ = 1;
                } else {
                    ++col_;
                }
            }
        };
        while (i < src_.size()) {
            char c = src_[i];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance(1);
                continue;
            }
            Token t;
            t.line = line_;
            t.column = col_;
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
                std::size_t j = i + 1;
                while (j < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[j])) || src_[j] == '_'))
                    ++j;
                t.kind = TokenKind::Ident;
                t.text = std::string(src_.substr(i, j - i));
                advance(j - i);
            } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                       (c == '.' && i + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i + 1])))) {
                std::size_t j = i;
                while (j < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[j])) || src_[j] == '.')) ++j;
                if (j < src_.size() && (src_[j] == 'e' || src_[j] == 'E')) {
                    std::size_t k = j + 1;
                    if (k < src_.size() && (src_[k] == '+' || src_[k] == '-')) ++k;
                    if (k < src_.size() && std::isdigit(static_cast<unsigned char>(src_[k]))) {
                        j = k;
                        while (j < src_.size() && std::isdigit(static_cast<unsigned char>(src_[j]))) ++j;
                    }
                }
                t.kind = TokenKind::Number;
                t.text = std::string(src_.substr(i, j - i));
                advance(j - i);
            } else if (c == '\'' || c == '"') {
                std::size_t j = i + 1;
                std::string s;
                bool closed = false;
                while (j < src_.size()) {
                    if (src_[j] == c) {
                        if (j + 1 < src_.size() && src_[j + 1] == c) {
                            s += c;
                            j += 2;
                            continue;
                        }
                        closed = true;
                        break;
                    }
                    s += src_[j++];
                }
                if (!closed)
                    fail(ErrorKind::Parse, "syntax error at line " + std::to_string(line_) + ", column " +
                                               std::to_string(col_) + ": unterminated string literal");
                t.kind = TokenKind::String;
                t.text = std::move(s);
                advance(j + 1 - i);
            } else {
                static constexpr std::string_view two[] = {"==", "!=", "<=", ">=", "<>"};
                t.kind = TokenKind::Symbol;
                t.text = std::string(1, c);
                for (auto op : two)
                    if (src_.substr(i, 2) == op) t.text = std::string(op);
                if (t.text.size() == 1 && std::string_view("+-*/=<>(),:").find(c) == std::string_view::npos)
                    fail(ErrorKind::Parse, "syntax error at line " + std::to_string(line_) + ", column " +
                                               std::to_string(col_) + ": unexpected character '" +
                                               std::string(1, c) + "'");
                advance(t.text.size());
            }
            toks_.push_back(std::move(t));
        }
        Token end;
        end.line = line_;
        end.column = col_;
        toks_.push_back(end);
    }

    std::string_view src_;
    std::size_t line_;
    std::size_t col_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

// ─── Expression AST ──────────────────────────────────────────────────────

enum class BinOp { Or, And, Eq, Ne, Lt, Le, Gt, Ge, Add, Sub, Mul, Div };
enum class UnOp { Neg, Not };

class Expr {
public:
    enum class Kind { Column, Literal, Unary, Binary };

    static Expr column(std::string name) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Column;
        n->name = std::move(name);
        return Expr(std::move(n));
    }
    static Expr literal(Value v) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Literal;
        n->value = std::move(v);
        return Expr(std::move(n));
    }
    static Expr unary(UnOp op, Expr operand) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Unary;
        n->unop = op;
        n->lhs = std::move(operand.node_);
        return Expr(std::move(n));
    }
    static Expr binary(BinOp op, Expr lhs, Expr rhs) {
        auto n = std::make_shared<Node>();
        n->kind = Kind::Binary;
        n->binop = op;
        n->lhs = std::move(lhs.node_);
        n->rhs = std::move(rhs.node_);
        return Expr(std::move(n));
    }

    Kind kind() const { return node_->kind; }
    const std::string& name() const { return node_->name; }
    const Value& value() const { return node_->value; }
    BinOp binop() const { return node_->binop; }
    UnOp unop() const { return node_->unop; }
    Expr lhs() const { return Expr(node_->lhs); }
    Expr rhs() const { return Expr(node_->rhs); }

    std::string toString() const { return print(0); }

    bool operator==(const Expr& o) const { return toString() == o.toString(); }

private:
    struct Node {
        Kind kind = Kind::Literal;
        std::string name;
        Value value;
        BinOp binop = BinOp::Add;
        UnOp unop = UnOp::Neg;
        std::shared_ptr<const Node> lhs;
        std::shared_ptr<const Node> rhs;
    };

    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

    static int precedence(BinOp op) {
        switch (op) {
        case BinOp::Or: return 1;
        case BinOp::And: return 2;
        case BinOp::Eq:
        case BinOp::Ne:
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge: return 4;
        case BinOp::Add:
        case BinOp::Sub: return 5;
        case BinOp::Mul:
        case BinOp::Div: return 6;
        }
        return 0;
    }

    static std::string_view symbol(BinOp op) {
        switch (op) {
        case BinOp::Or: return "or";
        case BinOp::And: return "and";
        case BinOp::Eq: return "=";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Div: return "/";
        }
        return "?";
    }

    std::string print(int outer) const {
        switch (kind()) {
        case Kind::Column: return name();
        case Kind::Literal: return toLiteral(value());
        case Kind::Unary: {
            std::string inner = lhs().print(7);
            std::string s = unop() == UnOp::Neg ? "-" + inner : "not " + lhs().print(3);
            int prec = unop() == UnOp::Neg ? 7 : 3;
            return prec < outer ? "(" + s + ")" : s;
        }
        case Kind::Binary: {
            int p = precedence(binop());
            // Left-associative: the right operand needs parens at equal precedence.
            std::string s = lhs().print(p) + " " + std::string(symbol(binop())) + " " + rhs().print(p + 1);
            return p < outer ? "(" + s + ")" : s;
        }
        }
        return "";
    }

    std::shared_ptr<const Node> node_;
};

// ─── Parser ──────────────────────────────────────────────────────────────

namespace detail {

class ExprParser {
public:
    explicit ExprParser(Lexer& lex) : lex_(lex) {}

    Expr parse() { return parseOr(); }

private:
    Expr parseOr() {
        Expr e = parseAnd();
        while (lex_.acceptKeyword("or")) e = Expr::binary(BinOp::Or, e, parseAnd());
        return e;
    }
    Expr parseAnd() {
        Expr e = parseNot();
        while (lex_.acceptKeyword("and")) e = Expr::binary(BinOp::And, e, parseNot());
        return e;
    }
    Expr parseNot() {
        if (lex_.acceptKeyword("not")) return Expr::unary(UnOp::Not, parseNot());
        return parseCmp();
    }
    Expr parseCmp() {
        Expr e = parseAdd();
        const auto& t = lex_.peek();
        if (t.kind == TokenKind::Symbol) {
            static const std::map<std::string, BinOp, std::less<>> ops = {
                {"=", BinOp::Eq}, {"==", BinOp::Eq}, {"!=", BinOp::Ne}, {"<>", BinOp::Ne}, {"<", BinOp::Lt},
                {"<=", BinOp::Le}, {">", BinOp::Gt}, {">=", BinOp::Ge}};
            if (auto it = ops.find(t.text); it != ops.end()) {
                lex_.next();
                e = Expr::binary(it->second, e, parseAdd());
            }
        }
        return e;
    }
    Expr parseAdd() {
        Expr e = parseMul();
        for (;;) {
            if (lex_.acceptSymbol("+")) e = Expr::binary(BinOp::Add, e, parseMul());
            else if (lex_.acceptSymbol("-")) e = Expr::binary(BinOp::Sub, e, parseMul());
            else return e;
        }
    }
    Expr parseMul() {
        Expr e = parseUnary();
        for (;;) {
            if (lex_.acceptSymbol("*")) e = Expr::binary(BinOp::Mul, e, parseUnary());
            else if (lex_.acceptSymbol("/")) e = Expr::binary(BinOp::Div, e, parseUnary());
            else return e;
        }
    }
    Expr parseUnary() {
        if (lex_.acceptSymbol("-")) {
            if (lex_.peek().kind == TokenKind::Number) {
                auto d = parseNumber(lex_.next().text);
                return Expr::literal(Value{-*d});
            }
            return Expr::unary(UnOp::Neg, parseUnary());
        }
        return parsePrimary();
    }
    Expr parsePrimary() {
        const Token t = lex_.peek();
        switch (t.kind) {
        case TokenKind::Number: {
            lex_.next();
            auto d = parseNumber(t.text);
            if (!d) lex_.error("malformed number");
            return Expr::literal(Value{*d});
        }
        case TokenKind::String: lex_.next(); return Expr::literal(Value{t.text});
        case TokenKind::Ident:
            if (t.text == "true" || t.text == "false") {
                lex_.next();
                return Expr::literal(Value{t.text == "true"});
            }
            if (t.text == "null") {
                lex_.next();
                return Expr::literal(Value{});
            }
            if (t.text == "and" || t.text == "or" || t.text == "not") lex_.error("expected operand");
            lex_.next();
            return Expr::column(t.text);
        case TokenKind::Symbol:
            if (t.text == "(") {
                lex_.next();
                Expr e = parseOr();
                lex_.expectSymbol(")");
                return e;
            }
            break;
        case TokenKind::End: break;
        }
        lex_.error("expected operand");
    }

    Lexer& lex_;
};

} // namespace detail

inline Expr parseExpr(Lexer& lex) { return detail::ExprParser(lex).parse(); }

inline Expr parseExpr(std::string_view src) {
    Lexer lex(src);
    Expr e = parseExpr(lex);
    if (!lex.atEnd()) lex.error("unexpected trailing input");
    return e;
}

// ─── Static checks ───────────────────────────────────────────────────────

inline void collectColumns(const Expr& e, std::set<std::string>& out) {
    switch (e.kind()) {
    case Expr::Kind::Column: out.insert(e.name()); break;
    case Expr::Kind::Literal: break;
    case Expr::Kind::Unary: collectColumns(e.lhs(), out); break;
    case Expr::Kind::Binary:
        collectColumns(e.lhs(), out);
        collectColumns(e.rhs(), out);
        break;
    }
}

inline std::set<std::string> columnsOf(const Expr& e) {
    std::set<std::string> out;
    collectColumns(e, out);
    return out;
}

inline Expr renameColumns(const Expr& e, const std::map<std::string, std::string>& names) {
    switch (e.kind()) {
    case Expr::Kind::Column: {
        auto it = names.find(e.name());
        return it == names.end() ? e : Expr::column(it->second);
    }
    case Expr::Kind::Literal: return e;
    case Expr::Kind::Unary: return Expr::unary(e.unop(), renameColumns(e.lhs(), names));
    case Expr::Kind::Binary:
        return Expr::binary(e.binop(), renameColumns(e.lhs(), names), renameColumns(e.rhs(), names));
    }
    return e;
}

/// Result type of `e` against `schema`; nullopt for the bare null literal.
inline std::optional<ValueType> typeCheck(const Expr& e, const Schema& schema, std::string_view where = "schema") {
    auto mismatch = [&](const std::string& msg) { fail(ErrorKind::Schema, msg + " in expression " + e.toString()); };
    switch (e.kind()) {
    case Expr::Kind::Column: return schema[schema.require(e.name(), where)].type;
    case Expr::Kind::Literal: return typeOf(e.value());
    case Expr::Kind::Unary: {
        auto t = typeCheck(e.lhs(), schema, where);
        if (e.unop() == UnOp::Neg) {
            if (t && *t != ValueType::Number) mismatch("negation of non-number");
            return ValueType::Number;
        }
        if (t && *t != ValueType::Boolean) mismatch("'not' of non-boolean");
        return ValueType::Boolean;
    }
    case Expr::Kind::Binary: {
        auto l = typeCheck(e.lhs(), schema, where);
        auto r = typeCheck(e.rhs(), schema, where);
        switch (e.binop()) {
        case BinOp::Or:
        case BinOp::And:
            if ((l && *l != ValueType::Boolean) || (r && *r != ValueType::Boolean)) mismatch("logical operand not boolean");
            return ValueType::Boolean;
        case BinOp::Add:
        case BinOp::Sub:
        case BinOp::Mul:
        case BinOp::Div:
            if ((l && *l != ValueType::Number) || (r && *r != ValueType::Number)) mismatch("arithmetic on non-number");
            return ValueType::Number;
        default:
            if (l && r && *l != *r) mismatch("comparison between " + std::string(typeName(*l)) + " and " +
                                             std::string(typeName(*r)));
            return ValueType::Boolean;
        }
    }
    }
    return std::nullopt;
}

// ─── Evaluation ──────────────────────────────────────────────────────────
// Null propagates through arithmetic and comparison; and/or use three-valued logic.

inline Value evaluate(const Expr& e, const Schema& schema, const Row& row) {
    switch (e.kind()) {
    case Expr::Kind::Column: return row[schema.require(e.name())];
    case Expr::Kind::Literal: return e.value();
    case Expr::Kind::Unary: {
        Value v = evaluate(e.lhs(), schema, row);
        if (isNull(v)) return v;
        if (e.unop() == UnOp::Neg) return Value{-std::get<double>(v)};
        return Value{!std::get<bool>(v)};
    }
    case Expr::Kind::Binary: {
        if (e.binop() == BinOp::And || e.binop() == BinOp::Or) {
            Value l = evaluate(e.lhs(), schema, row);
            Value r = evaluate(e.rhs(), schema, row);
            bool isAnd = e.binop() == BinOp::And;
            auto dominant = [&](const Value& v) { return isBool(v) && std::get<bool>(v) == !isAnd; };
            if (dominant(l) || dominant(r)) return Value{!isAnd};
            if (isNull(l) || isNull(r)) return Value{};
            return Value{isAnd};
        }
        Value l = evaluate(e.lhs(), schema, row);
        Value r = evaluate(e.rhs(), schema, row);
        if (isNull(l) || isNull(r)) return Value{};
        switch (e.binop()) {
        case BinOp::Add: return number(std::get<double>(l) + std::get<double>(r));
        case BinOp::Sub: return number(std::get<double>(l) - std::get<double>(r));
        case BinOp::Mul: return number(std::get<double>(l) * std::get<double>(r));
        case BinOp::Div:
            if (std::get<double>(r) == 0.0) fail(ErrorKind::Eval, "division by zero in " + e.toString());
            return number(std::get<double>(l) / std::get<double>(r));
        case BinOp::Eq: return Value{l == r};
        case BinOp::Ne: return Value{l != r};
        case BinOp::Lt: return Value{l < r};
        case BinOp::Le: return Value{l <= r};
        case BinOp::Gt: return Value{l > r};
        case BinOp::Ge: return Value{l >= r};
        default: break;
        }
        break;
    }
    }
    return Value{};
}

/// Predicate truth: null and false both reject.
inline bool holds(const Expr& predicate, const Schema& schema, const Row& row) {
    Value v = evaluate(predicate, schema, row);
    return isBool(v) && std::get<bool>(v);
}

} // namespace vizproxy
