#pragma once

#include "vizproxy/expr.hpp"
#include "vizproxy/table.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

namespace vizproxy {

enum class AggFn { Sum, Count, Avg, Min, Max };

inline std::string_view aggName(AggFn f) {
    switch (f) {
    case AggFn::Sum: return "sum";
    case AggFn::Count: return "count";
    case AggFn::Avg: return "avg";
    case AggFn::Min: return "min";
    case AggFn::Max: return "max";
    }
    return "?";
}

inline std::optional<AggFn> parseAggName(std::string_view s) {
    if (s == "sum") return AggFn::Sum;
    if (s == "count") return AggFn::Count;
    if (s == "avg") return AggFn::Avg;
    if (s == "min") return AggFn::Min;
    if (s == "max") return AggFn::Max;
    return std::nullopt;
}

// ─── Operators ───────────────────────────────────────────────────────────

struct FilterOp {
    Expr predicate;
};

struct DeriveOp {
    std::string output;
    Expr expr;
};

struct ProjectOp {
    std::vector<std::string> columns;
};

struct Aggregate {
    AggFn fn = AggFn::Sum;
    std::string input; // empty for count
    std::string output;

    bool operator==(const Aggregate&) const = default;
};

struct GroupAggregateOp {
    std::vector<std::string> keys;
    std::vector<Aggregate> aggs;
};

/// value / sum(column) over the whole table.
struct NormalizeOp {
    std::string input;
    std::string output;
};

/// Running sum in orderBy order, emitted as [lower, upper) interval endpoints.
struct StackOp {
    std::string input;
    std::vector<std::string> orderBy;
    std::string lower;
    std::string upper;
};

struct BinningOp {
    std::string input;
    double width = 1.0;
    std::string output;
};

struct SortKey {
    std::string column;
    bool descending = false;

    bool operator==(const SortKey&) const = default;
};

struct SortOp {
    std::vector<SortKey> keys;
};

struct LimitOp {
    std::size_t n = 0;
};

using TransformOp =
    std::variant<FilterOp, DeriveOp, ProjectOp, GroupAggregateOp, NormalizeOp, StackOp, BinningOp, SortOp, LimitOp>;

struct Pipeline {
    std::vector<TransformOp> ops;

    bool empty() const { return ops.empty(); }
    std::size_t size() const { return ops.size(); }
};

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// ─── Textual form ────────────────────────────────────────────────────────

inline std::string joinNames(const std::vector<std::string>& names, std::string_view sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += sep;
        out += names[i];
    }
    return out;
}

inline std::string describe(const TransformOp& op) {
    return std::visit(
        overloaded{
            [](const FilterOp& o) { return "Filter(" + o.predicate.toString() + ")"; },
            [](const DeriveOp& o) { return "Derive(" + o.output + "=" + o.expr.toString() + ")"; },
            [](const ProjectOp& o) { return "Project(" + joinNames(o.columns) + ")"; },
            [](const GroupAggregateOp& o) {
                std::string s = "GroupAggregate(" + joinNames(o.keys) + ";";
                for (std::size_t i = 0; i < o.aggs.size(); ++i) {
                    if (i) s += ",";
                    s += std::string(aggName(o.aggs[i].fn)) + "(" + o.aggs[i].input + ")->" + o.aggs[i].output;
                }
                return s + ")";
            },
            [](const NormalizeOp& o) { return "Normalize(" + o.input + "->" + o.output + ")"; },
            [](const StackOp& o) {
                return "Stack(" + o.input + ";" + joinNames(o.orderBy) + ";" + o.lower + "," + o.upper + ")";
            },
            [](const BinningOp& o) { return "Bin(" + o.input + "," + formatNumber(o.width) + "->" + o.output + ")"; },
            [](const SortOp& o) {
                std::string s = "Sort(";
                for (std::size_t i = 0; i < o.keys.size(); ++i) {
                    if (i) s += ",";
                    s += o.keys[i].column + (o.keys[i].descending ? " desc" : "");
                }
                return s + ")";
            },
            [](const LimitOp& o) { return "Limit(" + std::to_string(o.n) + ")"; },
        },
        op);
}

inline std::string describe(const Pipeline& p) {
    std::string out = "[";
    for (std::size_t i = 0; i < p.ops.size(); ++i) {
        if (i) out += ", ";
        out += describe(p.ops[i]);
    }
    return out + "]";
}

inline bool operator==(const Pipeline& a, const Pipeline& b) { return describe(a) == describe(b); }

// ─── Schema checking ─────────────────────────────────────────────────────

namespace detail {

inline void requireFresh(const Schema& s, const std::string& name) {
    if (name.empty()) fail(ErrorKind::Schema, "empty output column name");
    if (s.contains(name)) fail(ErrorKind::Schema, "output column " + name + " collides with an existing column");
}

inline void requireNumber(const Schema& s, const std::string& name, std::string_view opName) {
    auto i = s.require(name);
    if (s[i].type != ValueType::Number)
        fail(ErrorKind::Schema, std::string(opName) + " needs a number column, " + name + " is " +
                                    std::string(typeName(s[i].type)));
}

} // namespace detail

inline Schema outputSchema(const Schema& in, const TransformOp& op) {
    return std::visit(
        overloaded{
            [&](const FilterOp& o) {
                auto t = typeCheck(o.predicate, in);
                if (t && *t != ValueType::Boolean)
                    fail(ErrorKind::Schema, "filter predicate is not boolean: " + o.predicate.toString());
                return in;
            },
            [&](const DeriveOp& o) {
                auto t = typeCheck(o.expr, in);
                detail::requireFresh(in, o.output);
                return in.with({o.output, t.value_or(ValueType::Number)});
            },
            [&](const ProjectOp& o) {
                std::vector<Column> cols;
                for (const auto& c : o.columns) cols.push_back(in[in.require(c)]);
                return Schema(std::move(cols));
            },
            [&](const GroupAggregateOp& o) {
                std::vector<Column> cols;
                for (const auto& k : o.keys) cols.push_back(in[in.require(k)]);
                Schema out(cols);
                for (const auto& a : o.aggs) {
                    if (a.fn != AggFn::Count) detail::requireNumber(in, a.input, aggName(a.fn));
                    else if (!a.input.empty()) in.require(a.input);
                    detail::requireFresh(out, a.output);
                    out = out.with({a.output, ValueType::Number});
                }
                return out;
            },
            [&](const NormalizeOp& o) {
                detail::requireNumber(in, o.input, "normalize");
                detail::requireFresh(in, o.output);
                return in.with({o.output, ValueType::Number});
            },
            [&](const StackOp& o) {
                detail::requireNumber(in, o.input, "stack");
                if (o.orderBy.empty()) fail(ErrorKind::Schema, "stack requires an orderBy column");
                for (const auto& k : o.orderBy) in.require(k);
                if (o.lower == o.upper) fail(ErrorKind::Schema, "stack endpoints need distinct names");
                detail::requireFresh(in, o.lower);
                detail::requireFresh(in, o.upper);
                return in.with({o.lower, ValueType::Number}).with({o.upper, ValueType::Number});
            },
            [&](const BinningOp& o) {
                detail::requireNumber(in, o.input, "bin");
                if (!(o.width > 0) || !std::isfinite(o.width)) fail(ErrorKind::Schema, "bin width must be positive");
                detail::requireFresh(in, o.output);
                return in.with({o.output, ValueType::Number});
            },
            [&](const SortOp& o) {
                for (const auto& k : o.keys) in.require(k.column);
                return in;
            },
            [&](const LimitOp&) { return in; },
        },
        op);
}

inline Schema outputSchema(const Schema& in, const Pipeline& p) {
    Schema s = in;
    for (const auto& op : p.ops) s = outputSchema(s, op);
    return s;
}

// ─── Execution ───────────────────────────────────────────────────────────

namespace detail {

struct Accumulator {
    double sum = 0;
    std::size_t rows = 0;
    std::size_t nonNull = 0;
    std::optional<double> min;
    std::optional<double> max;

    void add(const Value& v) {
        ++rows;
        if (auto* d = std::get_if<double>(&v)) {
            ++nonNull;
            sum += *d;
            min = min ? std::min(*min, *d) : *d;
            max = max ? std::max(*max, *d) : *d;
        }
    }

    Value result(AggFn fn) const {
        switch (fn) {
        case AggFn::Sum: return number(sum);
        case AggFn::Count: return Value{static_cast<double>(rows)};
        case AggFn::Avg: return nonNull ? number(sum / static_cast<double>(nonNull)) : Value{};
        case AggFn::Min: return min ? Value{*min} : Value{};
        case AggFn::Max: return max ? Value{*max} : Value{};
        }
        return Value{};
    }
};

inline std::vector<std::size_t> orderedIndices(const Table& t, const std::vector<SortKey>& keys) {
    std::vector<std::size_t> idx(t.rowCount());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<std::pair<std::size_t, bool>> cols;
    for (const auto& k : keys) cols.emplace_back(t.schema().require(k.column), k.descending);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        for (auto [c, desc] : cols) {
            const auto& va = t.rows()[a][c];
            const auto& vb = t.rows()[b][c];
            if (va == vb) continue;
            return desc ? vb < va : va < vb;
        }
        return false;
    });
    return idx;
}

inline Table apply(const Table& in, const TransformOp& op) {
    const Schema out = outputSchema(in.schema(), op);
    const Schema& s = in.schema();
    return std::visit(
        overloaded{
            [&](const FilterOp& o) {
                std::vector<Row> rows;
                for (const auto& r : in.rows())
                    if (holds(o.predicate, s, r)) rows.push_back(r);
                return Table(out, std::move(rows));
            },
            [&](const DeriveOp& o) {
                std::vector<Row> rows;
                rows.reserve(in.rowCount());
                for (const auto& r : in.rows()) {
                    Row nr = r;
                    nr.push_back(evaluate(o.expr, s, r));
                    rows.push_back(std::move(nr));
                }
                return Table(out, std::move(rows));
            },
            [&](const ProjectOp& o) { return project(in, o.columns); },
            [&](const GroupAggregateOp& o) {
                std::vector<std::size_t> keyIdx;
                for (const auto& k : o.keys) keyIdx.push_back(s.require(k));
                std::vector<std::optional<std::size_t>> aggIdx;
                for (const auto& a : o.aggs)
                    aggIdx.push_back(a.input.empty() ? std::nullopt : std::optional(s.require(a.input)));

                std::map<Row, std::size_t> slot;
                std::vector<Row> keys;
                std::vector<std::vector<Accumulator>> accs;
                for (const auto& r : in.rows()) {
                    Row key;
                    for (auto i : keyIdx) key.push_back(r[i]);
                    auto [it, inserted] = slot.try_emplace(key, keys.size());
                    if (inserted) {
                        keys.push_back(key);
                        accs.emplace_back(o.aggs.size());
                    }
                    auto& group = accs[it->second];
                    for (std::size_t a = 0; a < o.aggs.size(); ++a)
                        group[a].add(aggIdx[a] ? r[*aggIdx[a]] : Value{0.0});
                }
                // A global aggregate over an empty table still yields one row.
                if (o.keys.empty() && keys.empty()) {
                    keys.emplace_back();
                    accs.emplace_back(o.aggs.size());
                }
                std::vector<Row> rows;
                for (std::size_t g = 0; g < keys.size(); ++g) {
                    Row row = keys[g];
                    for (std::size_t a = 0; a < o.aggs.size(); ++a) row.push_back(accs[g][a].result(o.aggs[a].fn));
                    rows.push_back(std::move(row));
                }
                return Table(out, std::move(rows));
            },
            [&](const NormalizeOp& o) {
                auto idx = s.require(o.input);
                double total = 0;
                for (const auto& r : in.rows())
                    if (auto* d = std::get_if<double>(&r[idx])) total += *d;
                if (total == 0.0 && in.rowCount() > 0) fail(ErrorKind::Eval, "zero total in Normalize(" + o.input + ")");
                std::vector<Row> rows;
                for (const auto& r : in.rows()) {
                    Row nr = r;
                    auto* d = std::get_if<double>(&r[idx]);
                    nr.push_back(d ? number(*d / total) : Value{});
                    rows.push_back(std::move(nr));
                }
                return Table(out, std::move(rows));
            },
            [&](const StackOp& o) {
                auto idx = s.require(o.input);
                std::vector<SortKey> keys;
                for (const auto& k : o.orderBy) keys.push_back({k, false});
                std::vector<Row> rows = in.rows();
                double running = 0;
                for (auto i : orderedIndices(in, keys)) {
                    double lo = running;
                    if (auto* d = std::get_if<double>(&rows[i][idx])) running += *d;
                    rows[i].push_back(Value{lo});
                    rows[i].push_back(number(running));
                }
                return Table(out, std::move(rows));
            },
            [&](const BinningOp& o) {
                auto idx = s.require(o.input);
                std::vector<Row> rows;
                for (const auto& r : in.rows()) {
                    Row nr = r;
                    auto* d = std::get_if<double>(&r[idx]);
                    nr.push_back(d ? number(std::floor(*d / o.width) * o.width) : Value{});
                    rows.push_back(std::move(nr));
                }
                return Table(out, std::move(rows));
            },
            [&](const SortOp& o) {
                std::vector<Row> rows;
                for (auto i : orderedIndices(in, o.keys)) rows.push_back(in.rows()[i]);
                return Table(out, std::move(rows));
            },
            [&](const LimitOp& o) {
                std::vector<Row> rows(in.rows().begin(),
                                      in.rows().begin() + static_cast<std::ptrdiff_t>(std::min(o.n, in.rowCount())));
                return Table(out, std::move(rows));
            },
        },
        op);
}

} // namespace detail

/// P = f(D). Pure; GroupAggregate emits groups in first-appearance order.
inline Table executePipeline(const Table& input, const Pipeline& f) {
    outputSchema(input.schema(), f);
    Table t = input;
    for (const auto& op : f.ops) t = detail::apply(t, op);
    return t;
}

} // namespace vizproxy
