#pragma once

#include "vizproxy/spec.hpp"
#include "vizproxy/task.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vizproxy {

// ─── Proxy operations ────────────────────────────────────────────────────

enum class ProxyOpKind { FilterMarks, ReadValue, SumK, Difference, Ratio, InvertStack, InvertNormalize, ComputeAggregate };

inline constexpr ProxyOpKind allProxyOpKinds[] = {
    ProxyOpKind::FilterMarks, ProxyOpKind::ReadValue,   ProxyOpKind::SumK,           ProxyOpKind::Difference,
    ProxyOpKind::Ratio,       ProxyOpKind::InvertStack, ProxyOpKind::InvertNormalize, ProxyOpKind::ComputeAggregate};

inline std::string_view proxyOpName(ProxyOpKind k) {
    switch (k) {
    case ProxyOpKind::FilterMarks: return "FilterMarks";
    case ProxyOpKind::ReadValue: return "ReadValue";
    case ProxyOpKind::SumK: return "SumK";
    case ProxyOpKind::Difference: return "Difference";
    case ProxyOpKind::Ratio: return "Ratio";
    case ProxyOpKind::InvertStack: return "InvertStack";
    case ProxyOpKind::InvertNormalize: return "InvertNormalize";
    case ProxyOpKind::ComputeAggregate: return "ComputeAggregate";
    }
    return "?";
}

inline std::optional<ProxyOpKind> parseProxyOpName(std::string_view s) {
    for (auto k : allProxyOpKinds)
        if (proxyOpName(k) == s) return k;
    return std::nullopt;
}

inline bool isInversion(ProxyOpKind k) { return k == ProxyOpKind::InvertStack || k == ProxyOpKind::InvertNormalize; }

/// One step of a proxy plan. Inputs refer to earlier steps by index.
///
/// Every step yields a small table whose last column is its value column:
/// FilterMarks the matching marks, ReadValue the listed attributes, ComputeAggregate
/// (groupBy..., value), and the arithmetic steps the keys of their keyed input plus value.
struct ProxyOp {
    ProxyOpKind kind = ProxyOpKind::ReadValue;
    std::vector<std::size_t> inputs;
    std::optional<Expr> predicate;    // FilterMarks
    std::vector<std::string> attrs;   // ReadValue, value attribute last
    AggFn fn = AggFn::Sum;            // ComputeAggregate
    std::vector<std::string> groupBy; // ComputeAggregate
    std::string totalOf;              // InvertNormalize: source column whose total is assumed known
    std::size_t arity = 1;            // estimated number of values the step touches

    std::string describe() const {
        std::string out(proxyOpName(kind));
        out += "(";
        std::vector<std::string> parts;
        switch (kind) {
        case ProxyOpKind::FilterMarks: parts.push_back(predicate->toString()); break;
        case ProxyOpKind::ReadValue: parts.push_back(joinNames(attrs)); break;
        case ProxyOpKind::ComputeAggregate:
            parts.push_back(std::string(aggName(fn)) + (groupBy.empty() ? "" : " by " + joinNames(groupBy)));
            break;
        case ProxyOpKind::InvertNormalize: parts.push_back("total of " + totalOf); break;
        default: break;
        }
        for (auto i : inputs) parts.push_back("%" + std::to_string(i));
        out += joinNames(parts, "; ");
        return out + ")";
    }

    bool operator==(const ProxyOp& o) const { return describe() == o.describe() && arity == o.arity; }
};

// ─── Verdicts and plans ──────────────────────────────────────────────────

enum class VerdictKind { Precomputed, Derivable, Adverse, Impossible };

inline std::string_view verdictName(VerdictKind v) {
    switch (v) {
    case VerdictKind::Precomputed: return "Precomputed";
    case VerdictKind::Derivable: return "Derivable";
    case VerdictKind::Adverse: return "Adverse";
    case VerdictKind::Impossible: return "Impossible";
    }
    return "?";
}

struct Verdict {
    VerdictKind kind = VerdictKind::Impossible;
    std::vector<std::string> inversions; // Adverse
    std::string reason;                  // Impossible: lossy pattern tag

    bool answerable() const { return kind != VerdictKind::Impossible; }
    std::string describe() const {
        std::string out(verdictName(kind));
        if (kind == VerdictKind::Adverse) out += "(" + joinNames(inversions) + ")";
        if (kind == VerdictKind::Impossible) out += "(" + reason + ")";
        return out;
    }
    bool operator==(const Verdict&) const = default;
};

/// q~P: the proxy for a task over the prepared table, or its readable projection
/// when viewLevel is set. The final step is the answer.
struct ProxyPlan {
    Verdict verdict;
    std::vector<ProxyOp> ops;
    bool viewLevel = true;
    bool scalar = true;                   // answer is one value, otherwise a table
    std::vector<std::string> outputNames; // column names of a table answer
    std::vector<std::string> assumptions;
    std::vector<std::string> rules;       // rewrite rules applied, sorted
    std::vector<std::string> subsumed;    // task body steps the pipeline already performs

    std::string describe() const {
        std::string out = verdict.describe() + " [";
        for (std::size_t i = 0; i < ops.size(); ++i) {
            if (i) out += ", ";
            out += "%" + std::to_string(i) + "=" + ops[i].describe();
        }
        return out + "]";
    }
};

/// Verdict implied by a plan's shape: any inversion is adverse; reads alone are
/// precomputed when the pipeline did part of the task's work.
inline Verdict classifyPlan(const std::vector<ProxyOp>& ops, bool pipelineDidWork) {
    Verdict v;
    for (const auto& op : ops)
        if (isInversion(op.kind)) {
            std::string name(proxyOpName(op.kind));
            if (std::find(v.inversions.begin(), v.inversions.end(), name) == v.inversions.end())
                v.inversions.push_back(name);
        }
    if (!v.inversions.empty()) {
        v.kind = VerdictKind::Adverse;
        return v;
    }
    bool readsOnly = std::all_of(ops.begin(), ops.end(), [](const ProxyOp& op) {
        return op.kind == ProxyOpKind::FilterMarks || op.kind == ProxyOpKind::ReadValue;
    });
    v.kind = readsOnly && pipelineDidWork ? VerdictKind::Precomputed : VerdictKind::Derivable;
    return v;
}

// ─── Execution ───────────────────────────────────────────────────────────

/// Facts about the source data a plan may rely on by assumption (known totals).
struct PlanContext {
    std::map<std::string, double> totals;

    static PlanContext fromData(const Table& d) {
        PlanContext ctx;
        for (std::size_t c = 0; c < d.schema().size(); ++c) {
            if (d.schema()[c].type != ValueType::Number) continue;
            double t = 0;
            for (const auto& r : d.rows())
                if (auto* x = std::get_if<double>(&r[c])) t += *x;
            ctx.totals[d.schema()[c].name] = t;
        }
        return ctx;
    }
};

namespace detail {

inline const std::string valueColumn = "#value";

inline Table keyedResult(const Table* keyed, std::vector<Value> values) {
    std::vector<Column> cols;
    std::vector<Row> rows(values.size());
    if (keyed) {
        const auto& s = keyed->schema();
        for (std::size_t c = 0; c + 1 < s.size(); ++c) cols.push_back(s[c]);
        for (std::size_t r = 0; r < values.size(); ++r)
            rows[r].assign(keyed->rows()[r].begin(), keyed->rows()[r].end() - 1);
    }
    cols.push_back({valueColumn, ValueType::Number});
    for (std::size_t r = 0; r < values.size(); ++r) rows[r].push_back(std::move(values[r]));
    return Table(Schema(cols), std::move(rows));
}

inline bool isKeyed(const Table& t) { return t.schema().size() > 1 || t.rowCount() != 1; }

inline Table elementwise(const Table& x, const Table& y, ProxyOpKind kind) {
    auto lastOf = [](const Table& t, std::size_t r) -> const Value& { return t.rows()[r].back(); };
    bool bx = !isKeyed(x), by = !isKeyed(y);
    std::size_t n = bx ? y.rowCount() : x.rowCount();
    if (!bx && !by && x.rowCount() != y.rowCount())
        fail(ErrorKind::Eval, std::string(proxyOpName(kind)) + " operands have " + std::to_string(x.rowCount()) +
                                  " and " + std::to_string(y.rowCount()) + " values");
    std::vector<Value> out;
    for (std::size_t r = 0; r < n; ++r) {
        const Value& a = lastOf(x, bx ? 0 : r);
        const Value& b = lastOf(y, by ? 0 : r);
        if (isNull(a) || isNull(b)) {
            out.emplace_back();
            continue;
        }
        double p = std::get<double>(a), q = std::get<double>(b);
        if (kind == ProxyOpKind::Ratio) {
            if (q == 0) fail(ErrorKind::Eval, "division by zero in Ratio");
            out.push_back(number(p / q));
        } else {
            out.push_back(number(p - q));
        }
    }
    return keyedResult(bx ? &y : &x, std::move(out));
}

inline void requireReadable(const Schema& view, const std::string& attr) {
    if (!view.contains(attr))
        fail(ErrorKind::Harness, "plan references unreadable attribute " + attr + " (view " + view.describe() + ")");
}

} // namespace detail

/// Runs a plan against the table the user can read: the readable projection of P at
/// view level, P itself otherwise.
inline TaskResult executePlan(const ProxyPlan& plan, const Table& view, const PlanContext& ctx = {}) {
    if (!plan.verdict.answerable()) fail(ErrorKind::Harness, "cannot execute a plan for an impossible verdict");
    if (plan.ops.empty()) fail(ErrorKind::Harness, "empty plan");
    std::vector<Table> vals;
    for (const auto& op : plan.ops) {
        for (auto i : op.inputs)
            if (i >= vals.size()) fail(ErrorKind::Harness, "plan step refers forward to %" + std::to_string(i));
        auto in = [&](std::size_t k) -> const Table& { return vals[op.inputs.at(k)]; };
        switch (op.kind) {
        case ProxyOpKind::FilterMarks: {
            for (const auto& c : columnsOf(*op.predicate)) detail::requireReadable(view.schema(), c);
            std::vector<Row> rows;
            for (const auto& r : view.rows())
                if (holds(*op.predicate, view.schema(), r)) rows.push_back(r);
            vals.emplace_back(view.schema(), std::move(rows));
            break;
        }
        case ProxyOpKind::ReadValue: {
            for (const auto& a : op.attrs) detail::requireReadable(view.schema(), a);
            vals.push_back(project(op.inputs.empty() ? view : in(0), op.attrs));
            break;
        }
        case ProxyOpKind::SumK: {
            double s = 0;
            for (std::size_t k = 0; k < op.inputs.size(); ++k)
                for (const auto& r : in(k).rows())
                    if (auto* d = std::get_if<double>(&r.back())) s += *d;
            vals.push_back(detail::keyedResult(nullptr, {number(s)}));
            break;
        }
        case ProxyOpKind::Difference:
        case ProxyOpKind::InvertStack: vals.push_back(detail::elementwise(in(0), in(1), ProxyOpKind::Difference)); break;
        case ProxyOpKind::Ratio: vals.push_back(detail::elementwise(in(0), in(1), ProxyOpKind::Ratio)); break;
        case ProxyOpKind::InvertNormalize: {
            auto it = ctx.totals.find(op.totalOf);
            if (it == ctx.totals.end()) fail(ErrorKind::Harness, "no known total for " + op.totalOf);
            std::vector<Value> out;
            for (const auto& r : in(0).rows())
                out.push_back(isNull(r.back()) ? Value{} : number(std::get<double>(r.back()) * it->second));
            vals.push_back(detail::keyedResult(&in(0), std::move(out)));
            break;
        }
        case ProxyOpKind::ComputeAggregate: {
            const Table& t = in(0);
            std::vector<std::size_t> keyIdx;
            for (const auto& k : op.groupBy) keyIdx.push_back(t.schema().require(k, "plan step input"));
            std::vector<Row> keys;
            std::vector<detail::Accumulator> accs;
            for (const auto& r : t.rows()) {
                Row key;
                for (auto i : keyIdx) key.push_back(r[i]);
                auto it = std::find(keys.begin(), keys.end(), key);
                if (it == keys.end()) {
                    keys.push_back(key);
                    accs.emplace_back();
                    it = keys.end() - 1;
                }
                accs[static_cast<std::size_t>(it - keys.begin())].add(r.back());
            }
            if (op.groupBy.empty() && keys.empty()) {
                keys.emplace_back();
                accs.emplace_back();
            }
            std::vector<Column> cols;
            for (auto i : keyIdx) cols.push_back(t.schema()[i]);
            cols.push_back({detail::valueColumn, ValueType::Number});
            std::vector<Row> rows;
            for (std::size_t g = 0; g < keys.size(); ++g) {
                Row row = keys[g];
                row.push_back(accs[g].result(op.fn));
                rows.push_back(std::move(row));
            }
            vals.emplace_back(Schema(cols), std::move(rows));
            break;
        }
        }
    }
    const Table& last = vals.back();
    if (plan.scalar) {
        if (last.rowCount() != 1)
            fail(ErrorKind::Extraction, "plan answer has " + std::to_string(last.rowCount()) + " values, expected one");
        return last.rows()[0].back();
    }
    if (plan.outputNames.size() != last.schema().size())
        fail(ErrorKind::Harness, "plan answer has " + std::to_string(last.schema().size()) + " columns, expected " +
                                     std::to_string(plan.outputNames.size()));
    std::vector<Column> cols;
    for (std::size_t c = 0; c < last.schema().size(); ++c) cols.push_back({plan.outputNames[c], last.schema()[c].type});
    return Table(Schema(cols), last.rows());
}

// ─── Serialization ───────────────────────────────────────────────────────

inline OrderedJson verdictToJson(const Verdict& v) {
    OrderedJson j;
    j["kind"] = verdictName(v.kind);
    if (v.kind == VerdictKind::Adverse) j["inversions"] = v.inversions;
    if (v.kind == VerdictKind::Impossible) j["reason"] = v.reason;
    return j;
}

inline OrderedJson proxyOpToJson(const ProxyOp& op) {
    OrderedJson j;
    j["op"] = proxyOpName(op.kind);
    if (op.predicate) j["predicate"] = op.predicate->toString();
    if (!op.attrs.empty()) j["attrs"] = op.attrs;
    if (op.kind == ProxyOpKind::ComputeAggregate) {
        j["fn"] = aggName(op.fn);
        j["groupBy"] = op.groupBy;
    }
    if (!op.totalOf.empty()) j["totalOf"] = op.totalOf;
    j["inputs"] = op.inputs;
    j["arity"] = op.arity;
    return j;
}

inline OrderedJson planToJson(const ProxyPlan& p) {
    OrderedJson j;
    j["verdict"] = verdictToJson(p.verdict);
    j["viewLevel"] = p.viewLevel;
    j["answer"] = p.scalar ? "scalar" : "table";
    if (!p.scalar) j["outputNames"] = p.outputNames;
    j["ops"] = OrderedJson::array();
    for (const auto& op : p.ops) j["ops"].push_back(proxyOpToJson(op));
    j["assumptions"] = p.assumptions;
    j["rules"] = p.rules;
    j["subsumed"] = p.subsumed;
    return j;
}

} // namespace vizproxy
