#pragma once

#include "vizproxy/pipeline.hpp"

#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace vizproxy {

// ─── Task queries ────────────────────────────────────────────────────────

enum class CombineOp { Sum, Difference, Ratio };

inline std::string_view combineSymbol(CombineOp op) {
    switch (op) {
    case CombineOp::Sum: return "+";
    case CombineOp::Difference: return "-";
    case CombineOp::Ratio: return "/";
    }
    return "?";
}

inline std::string_view combineName(CombineOp op) {
    switch (op) {
    case CombineOp::Sum: return "sum";
    case CombineOp::Difference: return "difference";
    case CombineOp::Ratio: return "ratio";
    }
    return "?";
}

/// The value of `column` in the single row of the body output satisfying `where`.
struct ValueAt {
    std::string column;
    Expr where;

    std::string describe() const { return column + " at " + where.toString(); }
};

struct ScalarExtract {
    ValueAt first;
    std::optional<CombineOp> op;
    std::optional<ValueAt> second;

    bool combined() const { return op.has_value(); }
    std::string describe() const {
        if (!combined()) return first.describe();
        return "(" + first.describe() + ") " + std::string(combineSymbol(*op)) + " (" + second->describe() + ")";
    }
};

/// q(D): a pipeline over the declared input plus an optional scalar extraction.
/// Without an extraction the result is the body's full output table.
struct TaskQuery {
    std::string source;
    Schema input;
    Pipeline body;
    std::optional<ScalarExtract> extract;

    Schema bodySchema() const { return outputSchema(input, body); }
    std::string describe() const {
        std::string out = vizproxy::describe(body);
        return extract ? out + " => " + extract->describe() : out + " => table";
    }
};

using TaskResult = std::variant<Table, Value>;

inline void checkExtract(const ValueAt& v, const Schema& out) {
    out.require(v.column, "task output");
    auto t = typeCheck(v.where, out, "task output");
    if (t && *t != ValueType::Boolean) fail(ErrorKind::Schema, "extraction predicate is not boolean: " + v.where.toString());
}

inline void checkTask(const TaskQuery& q) {
    Schema out = q.bodySchema();
    if (!q.extract) return;
    checkExtract(q.extract->first, out);
    if (q.extract->combined()) {
        checkExtract(*q.extract->second, out);
        for (const auto* v : {&q.extract->first, &*q.extract->second})
            if (out[out.indexOf(v->column).value()].type != ValueType::Number)
                fail(ErrorKind::Schema, "combine needs number operands, " + v->column + " is not a number");
    }
}

// ─── Evaluation ──────────────────────────────────────────────────────────

inline Value extractValue(const Table& out, const ValueAt& v) {
    auto col = out.schema().require(v.column, "task output");
    std::optional<std::size_t> hit;
    std::size_t matches = 0;
    for (std::size_t r = 0; r < out.rowCount(); ++r) {
        if (!holds(v.where, out.schema(), out.rows()[r])) continue;
        if (matches++ == 0) hit = r;
    }
    if (matches != 1)
        fail(ErrorKind::Extraction, "extraction " + v.describe() + " matched " + std::to_string(matches) + " rows");
    return out.rows()[*hit][col];
}

inline Value combineValues(CombineOp op, const Value& l, const Value& r) {
    if (isNull(l) || isNull(r)) return Value{};
    double a = std::get<double>(l), b = std::get<double>(r);
    switch (op) {
    case CombineOp::Sum: return number(a + b);
    case CombineOp::Difference: return number(a - b);
    case CombineOp::Ratio:
        if (b == 0) fail(ErrorKind::Eval, "division by zero in combine ratio");
        return number(a / b);
    }
    return Value{};
}

inline Value applyExtract(const Table& out, const ScalarExtract& x) {
    Value first = extractValue(out, x.first);
    if (!x.combined()) return first;
    return combineValues(*x.op, first, extractValue(out, *x.second));
}

/// Ground truth: the task executed directly on the source data.
inline TaskResult evaluateTask(const TaskQuery& q, const Table& d) {
    outputSchema(d.schema(), q.body);
    Table out = executePipeline(d, q.body);
    if (!q.extract) return out;
    checkTask(TaskQuery{q.source, d.schema(), q.body, q.extract});
    return applyExtract(out, *q.extract);
}

inline bool resultsClose(const TaskResult& a, const TaskResult& b, double eps) {
    if (a.index() != b.index()) return false;
    if (const auto* t = std::get_if<Table>(&a)) return tablesEqual(*t, std::get<Table>(b), eps);
    return valuesClose(std::get<Value>(a), std::get<Value>(b), eps);
}

inline std::string describe(const TaskResult& r) {
    if (const auto* t = std::get_if<Table>(&r)) return describe(*t);
    return toLiteral(std::get<Value>(r));
}

// ─── Parsing ─────────────────────────────────────────────────────────────

namespace detail {

inline std::string freshName(const Schema& s, const std::string& base) {
    if (!s.contains(base)) return base;
    for (int i = 2;; ++i)
        if (auto n = base + std::to_string(i); !s.contains(n)) return n;
}

struct TaskLine {
    Pipeline body;
    std::optional<ValueAt> at;
    std::string value; // column an `at` clause extracts
};

inline std::vector<std::string> identList(Lexer& lex, std::string_view what) {
    std::vector<std::string> out{lex.expectIdent(what)};
    while (lex.acceptSymbol(",")) out.push_back(lex.expectIdent(what));
    return out;
}

inline bool isClauseKeyword(const Token& t) { return t.kind == TokenKind::Ident && (t.text == "by" || t.text == "at"); }

// <agg> [col] [by keys] [at pred]  |  select cols [at pred]
inline TaskLine parseSimple(Lexer& lex, const Schema& input) {
    TaskLine out;
    std::string verb = lex.expectIdent("task verb");
    if (verb == "select") {
        auto cols = identList(lex, "column");
        for (const auto& c : cols) input.require(c, "task input");
        if (lex.acceptKeyword("at")) {
            if (cols.size() != 1) lex.error("select with 'at' extracts exactly one column");
            out.value = cols[0];
            out.at = ValueAt{cols[0], parseExpr(lex)};
        } else {
            out.body.ops.push_back(ProjectOp{cols});
        }
        return out;
    }

    bool percent = verb == "percent_of";
    auto fn = percent ? std::optional<AggFn>(AggFn::Sum) : parseAggName(verb);
    if (!fn) {
        lex.error("unknown task verb '" + verb + "', expected one of sum, count, avg, min, max, percent_of, select");
    }
    std::string column;
    if (*fn == AggFn::Count) {
        if (lex.peek().kind == TokenKind::Ident && !isClauseKeyword(lex.peek())) lex.error("count takes no column");
    } else {
        column = lex.expectIdent("column");
        input.require(column, "task input");
    }
    std::vector<std::string> keys;
    if (lex.acceptKeyword("by")) keys = identList(lex, "key column");
    if (percent && keys.empty()) lex.error("percent_of requires 'by'");

    Schema keySchema;
    {
        std::vector<Column> cols;
        for (const auto& k : keys) cols.push_back(input[input.require(k, "task input")]);
        keySchema = Schema(cols);
    }
    static const std::map<AggFn, std::string> names = {
        {AggFn::Sum, "s"}, {AggFn::Count, "c"}, {AggFn::Avg, "avg"}, {AggFn::Min, "min"}, {AggFn::Max, "max"}};
    std::string stat = freshName(keySchema, names.at(*fn));
    out.body.ops.push_back(GroupAggregateOp{keys, {{*fn, column, stat}}});
    out.value = stat;
    if (percent) {
        std::string p = freshName(keySchema.with({stat, ValueType::Number}), "p");
        out.body.ops.push_back(NormalizeOp{stat, p});
        out.value = p;
    }
    if (lex.acceptKeyword("at")) {
        out.at = ValueAt{out.value, parseExpr(lex)};
    } else if (percent) {
        auto cols = keys;
        cols.push_back(out.value);
        out.body.ops.push_back(ProjectOp{cols});
    }
    return out;
}

inline std::optional<CombineOp> parseCombineOp(const Token& t) {
    if (t.kind != TokenKind::Symbol) return std::nullopt;
    if (t.text == "+") return CombineOp::Sum;
    if (t.text == "-") return CombineOp::Difference;
    if (t.text == "/") return CombineOp::Ratio;
    return std::nullopt;
}

inline std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline Schema parseInputDecl(Lexer& lex) {
    std::vector<Column> cols;
    do {
        std::string name = lex.expectIdent("column name");
        lex.expectSymbol(":");
        std::string type = lex.expectIdent("column type");
        auto t = parseTypeName(type);
        if (!t) lex.error("unknown column type '" + type + "'");
        cols.push_back({name, *t});
    } while (lex.acceptSymbol(","));
    return Schema(cols);
}

} // namespace detail

/// Parses the line-oriented task language (grammar in docs/task-grammar.ebnf).
/// An `input` line declares the schema; `defaultInput` is used when it is absent.
inline TaskQuery parseTask(std::string_view text, std::optional<Schema> defaultInput = std::nullopt) {
    std::optional<Schema> input;
    std::map<std::string, detail::TaskLine> lets;
    std::optional<TaskQuery> result;
    std::vector<std::string> sourceLines;

    std::size_t lineNo = 0;
    std::istringstream in{std::string(text)};
    for (std::string raw; std::getline(in, raw);) {
        ++lineNo;
        std::string line = detail::trim(raw);
        if (line.empty() || line[0] == '#') continue;
        Lexer lex(raw, lineNo, 1);

        if (lex.acceptKeyword("input")) {
            if (input) lex.error("duplicate input declaration");
            if (!lets.empty() || result) lex.error("input must come first");
            input = detail::parseInputDecl(lex);
            if (!lex.atEnd()) lex.error("unexpected trailing input");
            sourceLines.push_back(line);
            continue;
        }
        if (!input) {
            if (!defaultInput) fail(ErrorKind::Parse, "task declares no input schema (line " + std::to_string(lineNo) + ")");
            input = defaultInput;
        }
        if (result) lex.error("only one task statement is allowed");
        sourceLines.push_back(line);

        if (lex.acceptKeyword("let")) {
            std::string name = lex.expectIdent("name");
            if (lets.count(name)) lex.error("duplicate let " + name);
            lex.expectSymbol("=");
            auto t = detail::parseSimple(lex, *input);
            if (!lex.atEnd()) lex.error("unexpected trailing input");
            if (!t.at) fail(ErrorKind::Parse, "let " + name + " must extract a single value with 'at' (line " +
                                                  std::to_string(lineNo) + ")");
            lets.emplace(name, std::move(t));
            continue;
        }

        TaskQuery q;
        q.input = *input;
        if (lex.acceptKeyword("combine")) {
            lex.expectSymbol("(");
            std::string lhs = lex.expectIdent("task reference");
            lex.expectSymbol(",");
            auto op = detail::parseCombineOp(lex.peek());
            if (!op) lex.error("expected one of '+', '-', '/'");
            lex.next();
            lex.expectSymbol(",");
            std::string rhs = lex.expectIdent("task reference");
            lex.expectSymbol(")");
            if (!lex.atEnd()) lex.error("unexpected trailing input");
            for (const auto& r : {lhs, rhs})
                if (!lets.count(r)) fail(ErrorKind::Parse, "unknown task reference " + r + " (line " + std::to_string(lineNo) + ")");
            const auto& a = lets.at(lhs);
            const auto& b = lets.at(rhs);
            if (!(a.body == b.body))
                fail(ErrorKind::Parse, "combine operands " + lhs + " and " + rhs + " need the same body: " +
                                           describe(a.body) + " vs " + describe(b.body));
            q.body = a.body;
            q.extract = ScalarExtract{*a.at, op, *b.at};
        } else {
            auto t = detail::parseSimple(lex, *input);
            if (!lex.atEnd()) lex.error("unexpected trailing input");
            q.body = t.body;
            if (t.at) q.extract = ScalarExtract{*t.at, std::nullopt, std::nullopt};
        }
        result = std::move(q);
    }
    if (!result) fail(ErrorKind::Parse, "task text contains no task statement");
    for (const auto& l : sourceLines) {
        if (!result->source.empty()) result->source += "\n";
        result->source += l;
    }
    checkTask(*result);
    return *result;
}

// ─── Templates and task sets ─────────────────────────────────────────────

/// A `$name` placeholder. Values come from `domain`, else from the domains map by
/// hole name, else by `column`; a hole with none of these is unbounded.
struct Hole {
    std::string name;
    bool quote = true; // substitute as a text literal
    std::optional<std::vector<std::string>> domain;
    std::optional<std::string> column;
};

struct TaskTemplate {
    std::string text;
    std::vector<Hole> holes;
};

using Domains = std::map<std::string, std::vector<std::string>>;
using Bindings = std::map<std::string, std::string>;

/// Product: every combination of hole values, first hole outermost.
/// UnorderedPairs: the two named holes take pairs i < j from their shared domain;
/// remaining holes vary as a product inside each pair.
struct EnumerationRule {
    enum class Kind { Product, UnorderedPairs } kind = Kind::Product;
    std::string first, second;
};

struct TemplateMember {
    TaskTemplate tmpl;
    EnumerationRule rule;
};

struct TaskSet {
    std::string name;
    std::vector<std::variant<TaskQuery, TemplateMember>> members;
};

inline std::optional<std::vector<std::string>> resolveDomain(const Hole& h, const Domains& domains) {
    if (h.domain) return h.domain;
    if (auto it = domains.find(h.name); it != domains.end()) return it->second;
    if (h.column)
        if (auto it = domains.find(*h.column); it != domains.end()) return it->second;
    return std::nullopt;
}

namespace detail {

inline std::string substitute(const TaskTemplate& t, const Bindings& b) {
    std::string out;
    const auto& s = t.text;
    for (std::size_t i = 0; i < s.size();) {
        if (s[i] != '$') {
            out += s[i++];
            continue;
        }
        std::size_t j = i + 1;
        while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
        std::string name = s.substr(i + 1, j - i - 1);
        auto hole = std::find_if(t.holes.begin(), t.holes.end(), [&](const Hole& h) { return h.name == name; });
        if (hole == t.holes.end()) fail(ErrorKind::Template, "template uses undeclared hole $" + name);
        const auto& v = b.at(name);
        out += hole->quote ? toLiteral(Value{v}) : v;
        i = j;
    }
    return out;
}

} // namespace detail

inline TaskQuery instantiateTemplate(const TaskTemplate& t, const Bindings& bindings, const Domains& domains = {},
                                     std::optional<Schema> defaultInput = std::nullopt) {
    for (const auto& h : t.holes) {
        auto it = bindings.find(h.name);
        if (it == bindings.end()) fail(ErrorKind::Template, "missing binding for hole $" + h.name);
        if (auto dom = resolveDomain(h, domains); dom && std::find(dom->begin(), dom->end(), it->second) == dom->end())
            fail(ErrorKind::Template, "value " + it->second + " is outside the domain of hole $" + h.name);
    }
    for (const auto& [name, _] : bindings)
        if (std::none_of(t.holes.begin(), t.holes.end(), [&](const Hole& h) { return h.name == name; }))
            fail(ErrorKind::Template, "binding for undeclared hole $" + name);
    return parseTask(detail::substitute(t, bindings), defaultInput);
}

inline std::vector<Bindings> enumerateBindings(const TemplateMember& m, const Domains& domains) {
    std::map<std::string, std::vector<std::string>> dom;
    for (const auto& h : m.tmpl.holes) {
        auto d = resolveDomain(h, domains);
        if (!d) fail(ErrorKind::Template, "hole $" + h.name + " is unbounded and no domain was provided");
        dom[h.name] = *d;
    }
    std::vector<Bindings> out{Bindings{}};
    auto extend = [&](const std::string& name) {
        std::vector<Bindings> next;
        for (const auto& b : out)
            for (const auto& v : dom.at(name)) {
                auto c = b;
                c[name] = v;
                next.push_back(std::move(c));
            }
        out = std::move(next);
    };
    bool pairs = m.rule.kind == EnumerationRule::Kind::UnorderedPairs;
    if (pairs) {
        if (!dom.count(m.rule.first) || !dom.count(m.rule.second))
            fail(ErrorKind::Template, "pair rule names an undeclared hole");
        const auto& d = dom.at(m.rule.first);
        std::vector<Bindings> next;
        for (std::size_t i = 0; i < d.size(); ++i)
            for (std::size_t j = i + 1; j < d.size(); ++j) next.push_back({{m.rule.first, d[i]}, {m.rule.second, d[j]}});
        out = std::move(next);
    }
    for (const auto& h : m.tmpl.holes) {
        if (pairs && (h.name == m.rule.first || h.name == m.rule.second)) continue;
        extend(h.name);
    }
    return out;
}

inline std::vector<TaskQuery> enumerateTaskSet(const TaskSet& s, const Schema& schema, const Domains& domains) {
    if (s.members.empty()) fail(ErrorKind::Template, "task set " + s.name + " is empty");
    std::vector<TaskQuery> out;
    for (const auto& m : s.members) {
        if (const auto* q = std::get_if<TaskQuery>(&m)) {
            out.push_back(*q);
            continue;
        }
        const auto& tm = std::get<TemplateMember>(m);
        for (const auto& b : enumerateBindings(tm, domains)) out.push_back(instantiateTemplate(tm.tmpl, b, domains, schema));
    }
    return out;
}

// ─── Standard task sets over (a:text, b:number) ─────────────────────────

inline TaskTemplate percentTemplate() {
    return {"percent_of b by a at a = $g", {Hole{"g", true, std::nullopt, "a"}}};
}

inline TaskTemplate pairTemplate() {
    return {"let x = percent_of b by a at a = $g1\n"
            "let y = percent_of b by a at a = $g2\n"
            "combine(x, $op, y)",
            {Hole{"g1", true, std::nullopt, "a"}, Hole{"g2", true, std::nullopt, "a"},
             Hole{"op", false, std::vector<std::string>{"+", "-"}, std::nullopt}}};
}

inline TaskTemplate statisticPairTemplate() {
    return {"let x = $stat b by a at a = $g1\n"
            "let y = $stat b by a at a = $g2\n"
            "combine(x, $op, y)",
            {Hole{"stat", false, std::nullopt, std::nullopt}, Hole{"g1", true, std::nullopt, "a"},
             Hole{"g2", true, std::nullopt, "a"}, Hole{"op", false, std::vector<std::string>{"+", "-"}, std::nullopt}}};
}

/// T1 one fixed lookup, T2 each group's percentage, T3 sums and differences of two
/// percentages, T4 any statistic between two groups (unbounded statistic hole).
inline TaskSet standardTaskSet(std::string_view name, const Schema& schema) {
    using K = EnumerationRule::Kind;
    if (name == "T1") return {"T1", {parseTask("percent_of b by a at a = 'A'", schema)}};
    if (name == "T2") return {"T2", {TemplateMember{percentTemplate(), {}}}};
    if (name == "T3") return {"T3", {TemplateMember{pairTemplate(), {K::UnorderedPairs, "g1", "g2"}}}};
    if (name == "T4") return {"T4", {TemplateMember{statisticPairTemplate(), {K::UnorderedPairs, "g1", "g2"}}}};
    fail(ErrorKind::Template, "unknown task set " + std::string(name));
}

} // namespace vizproxy
