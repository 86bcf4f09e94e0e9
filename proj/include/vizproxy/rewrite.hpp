#pragma once

#include "vizproxy/cost.hpp"
#include "vizproxy/plan.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vizproxy {

struct AnalysisOptions {
    bool viewLevel = true;
    bool knownTotal = false;
    /// Ordered value domains per source column. A known domain lets the first stacked
    /// segment be read directly and sharpens the cardinality estimates used for costing.
    std::map<std::string, std::vector<Value>> groupDomain;
    int depthBound = 6;
    std::size_t groups = 3;       // distinct values per key column when no domain is given
    std::size_t rowsPerGroup = 2; // source rows per group
};

// ─── Facts a prepared table offers ───────────────────────────────────────

enum class MeasureKind { Stat, Percent };

/// A per-group quantity: fn(column) grouped by keys, or its share of the total.
struct Measure {
    MeasureKind kind = MeasureKind::Stat;
    AggFn fn = AggFn::Sum;
    std::string column; // empty for count
    std::vector<std::string> keys;

    std::set<std::string> keySet() const { return {keys.begin(), keys.end()}; }
    bool sameAs(const Measure& o) const {
        return kind == o.kind && fn == o.fn && column == o.column && keySet() == o.keySet();
    }
    std::string describe() const {
        std::string s = std::string(aggName(fn)) + "(" + column + ")";
        if (kind == MeasureKind::Percent) s = "percent of " + s;
        return keys.empty() ? s : s + " by " + joinNames(keys);
    }
    /// describe() with keys in sorted order.
    std::string canonical() const {
        Measure m = *this;
        std::sort(m.keys.begin(), m.keys.end());
        return m.describe();
    }
};

struct Endpoints {
    Measure of;
    std::vector<std::string> orderBy;
    std::string lower, upper;
};

/// What P holds, derived from the pipeline alone. Raw mode: rows of D survive with
/// `rawColumns` intact. Grouped mode: one row per `keys` combination with `measures`.
struct ViewFacts {
    bool raw = true;
    std::vector<std::string> keys;
    std::set<std::string> rawColumns;
    std::vector<std::pair<std::string, Measure>> measures;
    std::vector<Endpoints> endpoints;
    std::set<std::string> readable;

    bool canRead(const std::string& a) const { return readable.count(a) > 0; }
};

namespace detail {

[[noreturn]] inline void unknownShape(const std::string& what) {
    fail(ErrorKind::Unknown, "outside the rewrite catalog: " + what);
}

inline std::optional<Measure> measureOf(const ViewFacts& f, const std::string& attr) {
    for (const auto& [a, m] : f.measures)
        if (a == attr) return m;
    return std::nullopt;
}

} // namespace detail

inline ViewFacts extractFacts(const VisSpec& spec, bool viewLevel) {
    checkSpec(spec);
    ViewFacts f;
    for (const auto& c : spec.input.columns()) f.rawColumns.insert(c.name);
    Schema s = spec.input;
    for (const auto& op : spec.pipeline.ops) {
        std::visit(
            overloaded{
                [&](const FilterOp& o) { detail::unknownShape("pipeline filter " + describe(TransformOp{o})); },
                [&](const LimitOp& o) { detail::unknownShape("pipeline limit " + describe(TransformOp{o})); },
                [&](const SortOp&) {},
                [&](const DeriveOp&) {},
                [&](const BinningOp&) {},
                [&](const ProjectOp& o) {
                    std::set<std::string> keep(o.columns.begin(), o.columns.end());
                    std::erase_if(f.rawColumns, [&](const std::string& c) { return !keep.count(c); });
                    std::erase_if(f.measures, [&](const auto& m) { return !keep.count(m.first); });
                    std::erase_if(f.endpoints, [&](const Endpoints& e) {
                        return !keep.count(e.lower) || !keep.count(e.upper);
                    });
                },
                [&](const GroupAggregateOp& o) {
                    if (!f.raw) detail::unknownShape("second group aggregation");
                    for (const auto& k : o.keys)
                        if (!f.rawColumns.count(k)) detail::unknownShape("grouping by derived column " + k);
                    for (const auto& a : o.aggs) {
                        std::string col = a.fn == AggFn::Count ? "" : a.input;
                        if (!col.empty() && !f.rawColumns.count(col))
                            detail::unknownShape("aggregate over derived column " + col);
                        f.measures.push_back({a.output, Measure{MeasureKind::Stat, a.fn, col, o.keys}});
                    }
                    f.raw = false;
                    f.keys = o.keys;
                    f.rawColumns.clear();
                },
                [&](const NormalizeOp& o) {
                    auto m = detail::measureOf(f, o.input);
                    if (m && m->kind == MeasureKind::Stat && (m->fn == AggFn::Sum || m->fn == AggFn::Count)) {
                        Measure p = *m;
                        p.kind = MeasureKind::Percent;
                        f.measures.push_back({o.output, p});
                    }
                },
                [&](const StackOp& o) {
                    if (auto m = detail::measureOf(f, o.input)) f.endpoints.push_back({*m, o.orderBy, o.lower, o.upper});
                },
            },
            op);
        s = outputSchema(s, op);
    }
    if (viewLevel) {
        for (const auto& a : readableAttributes(spec))
            if (s.contains(a)) f.readable.insert(a);
    } else {
        for (const auto& c : s.columns()) f.readable.insert(c.name);
    }
    return f;
}

// ─── Catalogs ────────────────────────────────────────────────────────────

struct RuleInfo {
    std::string name;
    std::string description;
};

inline const std::vector<RuleInfo>& rewriteRules() {
    static const std::vector<RuleInfo> rules = {
        {"direct-read", "read a value the prepared table already holds"},
        {"first-segment", "the first stacked segment starts at zero, so its upper endpoint is its value"},
        {"invert-stack", "segment value as the difference of its stack endpoints"},
        {"percent-from-stat-and-total", "group share as the group statistic over the total"},
        {"sum-from-percent-and-known-total", "group sum as its share times a known total"},
        {"total-from-groups", "overall sum or count by adding the per-group values"},
        {"rollup", "coarser grouping by aggregating a finer one"},
        {"stat-from-raw", "group statistic computed from raw rows"},
        {"avg-from-sum-and-count", "group average as sum over count"},
        {"combine", "sum, difference or ratio of two extracted values"},
    };
    return rules;
}

inline const std::vector<RuleInfo>& lossyPatterns() {
    static const std::vector<RuleInfo> patterns = {
        {"count-from-sum", "group sums do not determine row counts"},
        {"avg-from-sum", "group sums without counts do not determine averages"},
        {"avg-from-count", "group counts do not determine averages"},
        {"sum-from-percent", "shares do not determine sums without the total"},
        {"raw-from-aggregate", "aggregated rows do not determine the source rows"},
        {"finer-from-coarser-grouping", "a coarse grouping does not determine a finer one"},
        {"unreadable-attribute", "the information is in the prepared table but not bound to any channel"},
    };
    return patterns;
}

// ─── Task shapes ─────────────────────────────────────────────────────────

namespace detail {

struct Need {
    bool raw = false;
    Measure m;
    std::vector<std::string> cols; // raw
    std::optional<Expr> sel;
    bool keyed = false;
    std::optional<std::vector<std::string>> readKeys; // keyed reads carry these instead of m.keys

    const std::vector<std::string>& keyColumns() const { return readKeys ? *readKeys : m.keys; }

    std::string key() const {
        std::string s = raw ? "raw(" + joinNames(cols) + ")" : m.describe();
        if (sel) s += " at " + sel->toString();
        if (readKeys) s += " carrying " + joinNames(*readKeys);
        return keyed ? s + " keyed" : s;
    }
};

struct TaskShape {
    std::vector<Need> needs;          // one, or two for a combine
    std::optional<CombineOp> combine;
    bool scalar = true;
    std::vector<std::string> outputNames;
    std::vector<std::string> steps;   // logical body steps
    std::optional<Measure> stat;      // the body's aggregation, if any
    bool percent = false;
};

inline TaskShape shapeOf(const TaskQuery& q) {
    checkTask(q);
    TaskShape t;
    const auto& ops = q.body.ops;
    Need base;
    std::set<std::string> keyCols;
    std::string valueCol;
    if (ops.empty() || (ops.size() == 1 && std::holds_alternative<ProjectOp>(ops[0]))) {
        base.raw = true;
        if (ops.empty())
            for (const auto& c : q.input.columns()) base.cols.push_back(c.name);
        else
            base.cols = std::get<ProjectOp>(ops[0]).columns;
        for (const auto& c : q.input.columns()) keyCols.insert(c.name);
    } else if (const auto* ga = std::get_if<GroupAggregateOp>(&ops[0]); ga && ga->aggs.size() == 1) {
        const auto& a = ga->aggs[0];
        base.m = Measure{MeasureKind::Stat, a.fn, a.fn == AggFn::Count ? "" : a.input, ga->keys};
        keyCols.insert(ga->keys.begin(), ga->keys.end());
        t.stat = base.m;
        t.steps.push_back(describe(ops[0]));
        valueCol = a.output;
        std::size_t next = 1;
        if (next < ops.size()) {
            const auto* n = std::get_if<NormalizeOp>(&ops[next]);
            if (!n || n->input != a.output) unknownShape("task body " + describe(q.body));
            if (a.fn != AggFn::Sum && a.fn != AggFn::Count) unknownShape("share of a non-additive statistic");
            if (ga->keys.empty()) unknownShape("share without grouping");
            base.m.kind = MeasureKind::Percent;
            t.percent = true;
            t.steps.push_back(describe(ops[next]));
            valueCol = n->output;
            ++next;
        }
        if (next < ops.size()) {
            const auto* p = std::get_if<ProjectOp>(&ops[next]);
            auto expected = ga->keys;
            expected.push_back(valueCol);
            if (!p || p->columns != expected || next + 1 != ops.size()) unknownShape("task body " + describe(q.body));
        } else if (t.percent && !q.extract) {
            unknownShape("table answer with both statistic and share");
        }
    } else {
        unknownShape("task body " + describe(q.body));
    }

    if (!q.extract) {
        base.keyed = true;
        t.scalar = false;
        Schema out = q.bodySchema();
        for (const auto& c : out.columns()) t.outputNames.push_back(c.name);
        t.needs.push_back(base);
        return t;
    }
    auto needAt = [&](const ValueAt& v) {
        Need n = base;
        for (const auto& c : columnsOf(v.where))
            if (!keyCols.count(c)) unknownShape("extraction predicate on non-key column " + c);
        if (base.raw) n.cols = {v.column};
        else if (v.column != valueCol) unknownShape("extraction of key column " + v.column);
        n.sel = v.where;
        return n;
    };
    t.needs.push_back(needAt(q.extract->first));
    if (q.extract->combined()) {
        t.combine = q.extract->op;
        t.needs.push_back(needAt(*q.extract->second));
    }
    return t;
}

// ─── Derivation search ───────────────────────────────────────────────────

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    ProxyOp op;
    std::vector<NodePtr> kids;
    std::string key;
};

inline NodePtr makeNode(ProxyOp op, std::vector<NodePtr> kids) {
    auto n = std::make_shared<Node>();
    op.inputs.clear();
    n->key = op.describe() + "#" + std::to_string(op.arity) + "{";
    for (const auto& k : kids) n->key += k->key + ";";
    n->key += "}";
    n->op = std::move(op);
    n->kids = std::move(kids);
    return n;
}

struct Cand {
    NodePtr node;
    std::set<std::string> rules;
    std::set<std::string> reads; // measures read directly, or "raw"
    std::set<std::string> assumptions;
    std::vector<ProxyOp> ops;
    double cost = 0;
};

inline std::vector<ProxyOp> linearize(const NodePtr& root) {
    std::vector<ProxyOp> ops;
    std::map<std::string, std::size_t> seen;
    auto emit = [&](auto& self, const NodePtr& n) -> std::size_t {
        if (auto it = seen.find(n->key); it != seen.end()) return it->second;
        ProxyOp op = n->op;
        for (const auto& k : n->kids) op.inputs.push_back(self(self, k));
        ops.push_back(std::move(op));
        return seen[n->key] = ops.size() - 1;
    };
    emit(emit, root);
    return ops;
}

inline std::string opsKey(const std::vector<ProxyOp>& ops) {
    std::string s;
    for (const auto& op : ops) s += op.describe() + "|";
    return s;
}

inline bool cheaper(const Cand& a, const Cand& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.ops.size() != b.ops.size()) return a.ops.size() < b.ops.size();
    return opsKey(a.ops) < opsKey(b.ops);
}

class Rewriter {
public:
    Rewriter(const ViewFacts& f, const AnalysisOptions& o) : f_(f), o_(o) {}

    bool cut() const { return cut_; }

    Cand finish(NodePtr node, std::set<std::string> rules, std::set<std::string> reads,
                std::set<std::string> assumptions) const {
        Cand c{std::move(node), std::move(rules), std::move(reads), std::move(assumptions), {}, 0};
        c.ops = linearize(c.node);
        ProxyPlan p;
        p.verdict.kind = VerdictKind::Derivable;
        p.ops = c.ops;
        c.cost = costPlan(p, defaultProfile()).total;
        return c;
    }

    Cand join(ProxyOp op, std::vector<const Cand*> kids, std::string rule, std::set<std::string> extraAssumptions = {}) const {
        std::vector<NodePtr> nodes;
        std::set<std::string> rules{std::move(rule)}, reads, assumptions = std::move(extraAssumptions);
        for (const auto* k : kids) {
            nodes.push_back(k->node);
            rules.insert(k->rules.begin(), k->rules.end());
            reads.insert(k->reads.begin(), k->reads.end());
            assumptions.insert(k->assumptions.begin(), k->assumptions.end());
        }
        return finish(makeNode(std::move(op), std::move(nodes)), rules, reads, assumptions);
    }

    std::vector<Cand> derive(const Need& n, int depth) {
        if (depth >= o_.depthBound) {
            cut_ = true;
            return {};
        }
        auto key = n.key();
        if (std::find(path_.begin(), path_.end(), key) != path_.end()) return {};
        path_.push_back(key);
        std::vector<Cand> out;
        if (n.raw) {
            rawRead(n, out);
        } else {
            directRead(n, out);
            fromEndpoints(n, out);
            if (n.m.kind == MeasureKind::Percent) percentFromStat(n, depth, out);
            else {
                sumFromPercent(n, depth, out);
                rollup(n, depth, out);
                fromRaw(n, depth, out);
                avgFromSumAndCount(n, depth, out);
            }
        }
        path_.pop_back();
        std::sort(out.begin(), out.end(), cheaper);
        if (out.size() > 4) out.resize(4);
        return out;
    }

private:
    std::size_t domainSize(const std::string& col) const {
        auto it = o_.groupDomain.find(col);
        return it != o_.groupDomain.end() && !it->second.empty() ? it->second.size() : o_.groups;
    }

    std::size_t rowsOfP() const {
        if (f_.raw) return o_.groups * o_.rowsPerGroup;
        std::size_t r = 1;
        for (const auto& k : f_.keys) r *= domainSize(k);
        return r;
    }

    std::size_t selectedRows(const Need& n) const {
        if (!n.sel) return rowsOfP();
        auto cols = columnsOf(*n.sel);
        if (f_.raw) return o_.rowsPerGroup;
        std::size_t r = 1;
        for (const auto& k : f_.keys)
            if (!cols.count(k)) r *= domainSize(k);
        return r;
    }

    bool selReadable(const Need& n) const {
        if (!n.sel) return true;
        for (const auto& c : columnsOf(*n.sel))
            if (!f_.canRead(c)) return false;
        return true;
    }

    bool keysReadable(const std::vector<std::string>& keys) const {
        return std::all_of(keys.begin(), keys.end(), [&](const std::string& k) { return f_.canRead(k); });
    }

    NodePtr read(const Need& n, std::vector<std::string> attrs) const {
        ProxyOp r;
        r.kind = ProxyOpKind::ReadValue;
        r.attrs = std::move(attrs);
        r.arity = selectedRows(n);
        std::vector<NodePtr> kids;
        if (n.sel) {
            ProxyOp filt;
            filt.kind = ProxyOpKind::FilterMarks;
            filt.predicate = n.sel;
            filt.arity = rowsOfP();
            kids.push_back(makeNode(filt, {}));
        }
        return makeNode(std::move(r), std::move(kids));
    }

    std::vector<std::string> withKeys(const Need& n, const std::string& attr) const {
        std::vector<std::string> attrs;
        if (n.keyed) attrs = n.keyColumns();
        attrs.push_back(attr);
        return attrs;
    }

    void rawRead(const Need& n, std::vector<Cand>& out) const {
        if (!f_.raw || !selReadable(n)) return;
        for (const auto& c : n.cols)
            if (!f_.rawColumns.count(c) || !f_.canRead(c)) return;
        out.push_back(finish(read(n, n.cols), {"direct-read"}, {"raw"}, {}));
    }

    void directRead(const Need& n, std::vector<Cand>& out) const {
        if (f_.raw || !selReadable(n) || (n.keyed && !keysReadable(n.keyColumns()))) return;
        for (const auto& [attr, m] : f_.measures) {
            if (!m.sameAs(n.m) || !f_.canRead(attr)) continue;
            out.push_back(finish(read(n, withKeys(n, attr)), {"direct-read"}, {m.canonical()}, {}));
        }
    }

    bool selectsFirstSegment(const Need& n, const Endpoints& e) const {
        if (!n.sel || n.keyed || e.orderBy.size() != 1 || f_.keys != e.orderBy) return false;
        const auto& k = e.orderBy[0];
        auto dom = o_.groupDomain.find(k);
        if (dom == o_.groupDomain.end() || dom->second.empty()) return false;
        const Expr& s = *n.sel;
        if (s.kind() != Expr::Kind::Binary || s.binop() != BinOp::Eq) return false;
        Expr col = s.lhs(), lit = s.rhs();
        if (col.kind() != Expr::Kind::Column) std::swap(col, lit);
        if (col.kind() != Expr::Kind::Column || lit.kind() != Expr::Kind::Literal || col.name() != k) return false;
        return lit.value() == *std::min_element(dom->second.begin(), dom->second.end());
    }

    void fromEndpoints(const Need& n, std::vector<Cand>& out) const {
        if (f_.raw || !selReadable(n) || (n.keyed && !keysReadable(n.keyColumns()))) return;
        for (const auto& e : f_.endpoints) {
            if (!e.of.sameAs(n.m) || !f_.canRead(e.upper)) continue;
            if (selectsFirstSegment(n, e))
                out.push_back(finish(read(n, withKeys(n, e.upper)), {"first-segment"}, {e.of.canonical()}, {}));
            if (!f_.canRead(e.lower)) continue;
            ProxyOp inv;
            inv.kind = ProxyOpKind::InvertStack;
            inv.arity = selectedRows(n);
            out.push_back(finish(makeNode(inv, {read(n, withKeys(n, e.upper)), read(n, withKeys(n, e.lower))}),
                                 {"invert-stack"}, {e.of.canonical()}, {}));
        }
    }

    void percentFromStat(const Need& n, int depth, std::vector<Cand>& out) {
        Need stat = n;
        stat.m.kind = MeasureKind::Stat;
        Need total;
        total.m = Measure{MeasureKind::Stat, n.m.fn, n.m.column, {}};
        auto stats = derive(stat, depth + 1);
        if (stats.empty()) return;
        auto totals = derive(total, depth + 1);
        for (const auto& s : stats)
            for (const auto& t : totals) {
                ProxyOp r;
                r.kind = ProxyOpKind::Ratio;
                r.arity = n.keyed ? selectedRows(n) : 1;
                out.push_back(join(r, {&s, &t}, "percent-from-stat-and-total"));
            }
    }

    void sumFromPercent(const Need& n, int depth, std::vector<Cand>& out) {
        if (!o_.knownTotal || n.m.fn != AggFn::Sum || n.m.keys.empty()) return;
        Need p = n;
        p.m.kind = MeasureKind::Percent;
        for (const auto& c : derive(p, depth + 1)) {
            ProxyOp inv;
            inv.kind = ProxyOpKind::InvertNormalize;
            inv.totalOf = n.m.column;
            inv.arity = n.keyed ? selectedRows(n) : 1;
            out.push_back(join(inv, {&c}, "sum-from-percent-and-known-total", {"known-total"}));
        }
    }

    void rollup(const Need& n, int depth, std::vector<Cand>& out) {
        if (f_.raw || n.m.fn == AggFn::Avg) return;
        std::set<std::string> have(f_.keys.begin(), f_.keys.end());
        auto want = n.m.keySet();
        if (want.size() >= have.size() || !std::includes(have.begin(), have.end(), want.begin(), want.end())) return;
        if (n.sel)
            for (const auto& c : columnsOf(*n.sel))
                if (!want.count(c)) return;
        Need fine = n;
        fine.m.keys = f_.keys;
        fine.readKeys = n.m.keys;
        fine.keyed = n.keyed && !n.m.keys.empty();
        bool total = n.m.keys.empty();
        for (const auto& c : derive(fine, depth + 1)) {
            ProxyOp op;
            op.arity = c.ops.back().arity;
            bool additive = n.m.fn == AggFn::Sum || n.m.fn == AggFn::Count;
            if (!n.keyed && additive) {
                op.kind = ProxyOpKind::SumK;
            } else {
                op.kind = ProxyOpKind::ComputeAggregate;
                op.fn = n.m.fn == AggFn::Count ? AggFn::Sum : n.m.fn;
                if (n.keyed) op.groupBy = n.m.keys;
            }
            out.push_back(join(op, {&c}, total ? "total-from-groups" : "rollup"));
        }
    }

    void fromRaw(const Need& n, int depth, std::vector<Cand>& out) {
        if (!f_.raw) return;
        std::string value = n.m.column;
        if (value.empty()) {
            if (!n.m.keys.empty()) value = n.m.keys.back();
            else
                for (const auto& c : f_.rawColumns)
                    if (f_.canRead(c)) {
                        value = c;
                        break;
                    }
            if (value.empty()) return;
        }
        Need rows;
        rows.raw = true;
        rows.sel = n.sel;
        rows.keyed = n.keyed;
        if (n.keyed) rows.cols = n.m.keys;
        if (std::find(rows.cols.begin(), rows.cols.end(), value) == rows.cols.end()) rows.cols.push_back(value);
        for (const auto& c : derive(rows, depth + 1)) {
            std::size_t k = c.ops.back().arity;
            if (!n.keyed && n.m.fn == AggFn::Sum) {
                ProxyOp sum;
                sum.kind = ProxyOpKind::SumK;
                sum.arity = k;
                out.push_back(join(sum, {&c}, "stat-from-raw"));
            }
            ProxyOp agg;
            agg.kind = ProxyOpKind::ComputeAggregate;
            agg.fn = n.m.fn;
            agg.arity = k;
            if (n.keyed) agg.groupBy = n.m.keys;
            out.push_back(join(agg, {&c}, "stat-from-raw"));
        }
    }

    void avgFromSumAndCount(const Need& n, int depth, std::vector<Cand>& out) {
        if (n.m.fn != AggFn::Avg) return;
        Need sum = n, count = n;
        sum.m.fn = AggFn::Sum;
        count.m.fn = AggFn::Count;
        count.m.column.clear();
        auto sums = derive(sum, depth + 1);
        if (sums.empty()) return;
        auto counts = derive(count, depth + 1);
        for (const auto& s : sums)
            for (const auto& c : counts) {
                ProxyOp r;
                r.kind = ProxyOpKind::Ratio;
                r.arity = n.keyed ? selectedRows(n) : 1;
                out.push_back(join(r, {&s, &c}, "avg-from-sum-and-count"));
            }
    }

    const ViewFacts& f_;
    const AnalysisOptions& o_;
    bool cut_ = false;
    std::vector<std::string> path_;
};

/// Names the lossy pattern behind a failed need from the facts the reader has.
inline std::string lossyReason(const Need& n, const ViewFacts& f, const AnalysisOptions& o) {
    if (n.raw) return f.raw ? "missing-column" : "raw-from-aggregate";
    if (f.raw) return "missing-column";
    std::set<std::string> have(f.keys.begin(), f.keys.end());
    auto want = n.m.keySet();
    if (!std::includes(have.begin(), have.end(), want.begin(), want.end())) return "finer-from-coarser-grouping";
    std::set<AggFn> fns;
    bool percent = false;
    auto note = [&](const Measure& m) {
        if (!m.column.empty() && !n.m.column.empty() && m.column != n.m.column) return;
        if (m.kind == MeasureKind::Percent) percent = true;
        else fns.insert(m.fn);
    };
    for (const auto& [attr, m] : f.measures)
        if (f.canRead(attr)) note(m);
    for (const auto& e : f.endpoints)
        if (f.canRead(e.lower) && f.canRead(e.upper)) note(e.of);
    std::string fn(aggName(n.m.fn));
    if (n.m.fn == AggFn::Count && fns.count(AggFn::Sum)) return "count-from-sum";
    if (n.m.fn == AggFn::Avg && fns.count(AggFn::Sum) && !fns.count(AggFn::Count)) return "avg-from-sum";
    if (n.m.fn == AggFn::Avg && fns.count(AggFn::Count) && !fns.count(AggFn::Sum)) return "avg-from-count";
    if (n.m.fn == AggFn::Sum && percent && !o.knownTotal) return "sum-from-percent";
    if (!fns.empty()) return fn + "-from-" + std::string(aggName(*fns.begin()));
    if (percent) return fn + "-from-percent";
    return fn + "-from-keys";
}

struct Search {
    std::optional<Cand> best;
    std::optional<std::size_t> failedNeed;
    bool cut = false;
};

inline Search search(const TaskShape& shape, const ViewFacts& f, const AnalysisOptions& o) {
    Search s;
    Rewriter rw(f, o);
    std::vector<std::vector<Cand>> perNeed;
    for (std::size_t i = 0; i < shape.needs.size(); ++i) {
        perNeed.push_back(rw.derive(shape.needs[i], 0));
        if (perNeed.back().empty() && !s.failedNeed) s.failedNeed = i;
    }
    s.cut = rw.cut();
    if (s.failedNeed) return s;
    std::vector<Cand> finals;
    if (!shape.combine) {
        finals = perNeed[0];
    } else {
        for (const auto& a : perNeed[0])
            for (const auto& b : perNeed[1]) {
                ProxyOp op;
                op.kind = *shape.combine == CombineOp::Sum        ? ProxyOpKind::SumK
                          : *shape.combine == CombineOp::Difference ? ProxyOpKind::Difference
                                                                    : ProxyOpKind::Ratio;
                op.arity = op.kind == ProxyOpKind::SumK ? 2 : 1;
                finals.push_back(rw.join(op, {&a, &b}, "combine"));
            }
    }
    s.best = *std::min_element(finals.begin(), finals.end(), cheaper);
    return s;
}

} // namespace detail

/// Decides whether q can be answered from what the chart shows and returns the
/// cheapest proxy found. Throws ErrorKind::Unknown when the task or pipeline falls
/// outside the rule catalog, or when the depth bound cut off every derivation.
inline ProxyPlan analyze(const TaskQuery& q, const VisSpec& spec, const AnalysisOptions& options = {}) {
    if (!(q.input == spec.input))
        fail(ErrorKind::Schema, "task input " + q.input.describe() + " differs from spec input " + spec.input.describe());
    auto shape = detail::shapeOf(q);
    auto facts = extractFacts(spec, options.viewLevel);
    auto found = detail::search(shape, facts, options);

    ProxyPlan plan;
    plan.viewLevel = options.viewLevel;
    plan.scalar = shape.scalar;
    plan.outputNames = shape.outputNames;
    if (options.knownTotal) plan.assumptions.push_back("known-total");

    if (!found.best) {
        if (found.cut)
            fail(ErrorKind::Unknown, "rewrite depth bound " + std::to_string(options.depthBound) +
                                         " exceeded before a derivation was found");
        plan.verdict.kind = VerdictKind::Impossible;
        const auto& need = shape.needs[*found.failedNeed];
        auto full = extractFacts(spec, false);
        bool dataLevelOk = options.viewLevel && detail::search(shape, full, options).best.has_value();
        if (!dataLevelOk) {
            plan.verdict.reason = detail::lossyReason(need, full, options);
        } else {
            // P has the answer; name what the readable columns lack if it is a known pattern.
            auto reason = detail::lossyReason(need, facts, options);
            bool known = std::any_of(lossyPatterns().begin(), lossyPatterns().end(),
                                     [&](const RuleInfo& r) { return r.name == reason; });
            plan.verdict.reason = known ? reason : "unreadable-attribute";
        }
        return plan;
    }

    const auto& best = *found.best;
    plan.ops = best.ops;
    plan.rules.assign(best.rules.begin(), best.rules.end());
    for (const auto& a : best.assumptions)
        if (std::find(plan.assumptions.begin(), plan.assumptions.end(), a) == plan.assumptions.end())
            plan.assumptions.push_back(a);
    if (shape.stat) {
        Measure stat = *shape.stat;
        Measure share = stat;
        share.kind = MeasureKind::Percent;
        bool statRead = false, shareRead = false;
        for (const auto& r : best.reads) {
            if (r == stat.canonical() || r == share.canonical()) statRead = true;
            if (r == share.canonical()) shareRead = true;
        }
        if (statRead) plan.subsumed.push_back(shape.steps[0]);
        if (shareRead && shape.percent) plan.subsumed.push_back(shape.steps[1]);
    }
    plan.verdict = classifyPlan(plan.ops, !plan.subsumed.empty());
    return plan;
}

inline ProxyPlan analyze(const TaskQuery& q, const VisSpec& spec, bool viewLevel, AnalysisOptions options = {}) {
    options.viewLevel = viewLevel;
    return analyze(q, spec, options);
}

// ─── Work split and flexibility ──────────────────────────────────────────

struct WorkSplit {
    std::vector<std::string> precomputedSteps;
    std::vector<std::string> residualOps;
    double residualShare = 1;
};

inline WorkSplit workSplitOf(const ProxyPlan& plan) {
    if (!plan.verdict.answerable()) fail(ErrorKind::Harness, "no work split for an impossible task");
    WorkSplit w;
    w.precomputedSteps = plan.subsumed;
    for (const auto& op : plan.ops)
        if (op.kind != ProxyOpKind::FilterMarks) w.residualOps.push_back(op.describe());
    double r = static_cast<double>(w.residualOps.size());
    double s = static_cast<double>(w.precomputedSteps.size());
    w.residualShare = r + s > 0 ? r / (r + s) : 0;
    return w;
}

inline WorkSplit workSplit(const TaskQuery& q, const VisSpec& spec, const AnalysisOptions& options = {}) {
    auto plan = analyze(q, spec, options);
    if (!plan.verdict.answerable())
        fail(ErrorKind::Harness, "task is impossible for " + spec.name + ": " + plan.verdict.reason);
    return workSplitOf(plan);
}

struct FlexibilityEntry {
    std::string task;
    ProxyPlan plan;
    std::optional<double> residualShare;
};

struct FlexibilityReport {
    std::vector<FlexibilityEntry> entries;
    double coverage = 0;
    std::optional<double> meanResidualShare;
};

inline FlexibilityReport flexibilityReport(const VisSpec& spec, const std::vector<TaskQuery>& tasks,
                                           const AnalysisOptions& options = {}) {
    if (tasks.empty()) fail(ErrorKind::Template, "flexibility report needs at least one task");
    FlexibilityReport r;
    std::size_t answerable = 0;
    double shareSum = 0;
    for (const auto& q : tasks) {
        FlexibilityEntry e{q.source, analyze(q, spec, options), std::nullopt};
        if (e.plan.verdict.answerable()) {
            ++answerable;
            e.residualShare = workSplitOf(e.plan).residualShare;
            shareSum += *e.residualShare;
        }
        r.entries.push_back(std::move(e));
    }
    r.coverage = static_cast<double>(answerable) / static_cast<double>(tasks.size());
    if (answerable) r.meanResidualShare = shareSum / static_cast<double>(answerable);
    return r;
}

} // namespace vizproxy
