#pragma once

#include "vizproxy/rewrite.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace vizproxy {

// ─── Pipeline normal form ────────────────────────────────────────────────

namespace detail {

inline Expr renameExpr(const Expr& e, const std::map<std::string, std::string>& names) {
    switch (e.kind()) {
    case Expr::Kind::Column: {
        auto it = names.find(e.name());
        return it == names.end() ? e : Expr::column(it->second);
    }
    case Expr::Kind::Literal: return e;
    case Expr::Kind::Unary: return Expr::unary(e.unop(), renameExpr(e.lhs(), names));
    case Expr::Kind::Binary: return Expr::binary(e.binop(), renameExpr(e.lhs(), names), renameExpr(e.rhs(), names));
    }
    return e;
}

inline std::set<std::string> referencedColumns(const TransformOp& op) {
    return std::visit(overloaded{[](const FilterOp& o) { return columnsOf(o.predicate); },
                                 [](const DeriveOp& o) { return columnsOf(o.expr); },
                                 [](const ProjectOp& o) { return std::set<std::string>(o.columns.begin(), o.columns.end()); },
                                 [](const GroupAggregateOp& o) {
                                     std::set<std::string> s(o.keys.begin(), o.keys.end());
                                     for (const auto& a : o.aggs)
                                         if (!a.input.empty()) s.insert(a.input);
                                     return s;
                                 },
                                 [](const NormalizeOp& o) { return std::set<std::string>{o.input}; },
                                 [](const StackOp& o) {
                                     std::set<std::string> s(o.orderBy.begin(), o.orderBy.end());
                                     s.insert(o.input);
                                     return s;
                                 },
                                 [](const BinningOp& o) { return std::set<std::string>{o.input}; },
                                 [](const SortOp& o) {
                                     std::set<std::string> s;
                                     for (const auto& k : o.keys) s.insert(k.column);
                                     return s;
                                 },
                                 [](const LimitOp&) { return std::set<std::string>{}; }},
                      op);
}

/// Columns an op adds to the rows it receives (GroupAggregate replaces them instead).
inline std::vector<std::string> addedColumns(const TransformOp& op) {
    if (const auto* d = std::get_if<DeriveOp>(&op)) return {d->output};
    if (const auto* n = std::get_if<NormalizeOp>(&op)) return {n->output};
    if (const auto* s = std::get_if<StackOp>(&op)) return {s->lower, s->upper};
    if (const auto* b = std::get_if<BinningOp>(&op)) return {b->output};
    return {};
}

/// Whether a filter may move in front of `prev` without changing the result.
inline bool filterCommutes(const TransformOp& prev, const FilterOp& f) {
    auto cols = columnsOf(f.predicate);
    auto defines = [&](const std::vector<std::string>& out) {
        return std::any_of(out.begin(), out.end(), [&](const std::string& c) { return cols.count(c) > 0; });
    };
    return std::visit(overloaded{[&](const FilterOp& p) { return p.predicate.toString() > f.predicate.toString(); },
                                 [&](const DeriveOp& p) { return !defines({p.output}); },
                                 [&](const BinningOp& p) { return !defines({p.output}); },
                                 [](const ProjectOp&) { return true; },
                                 [](const SortOp&) { return true; },
                                 [&](const GroupAggregateOp& p) {
                                     return std::all_of(cols.begin(), cols.end(), [&](const std::string& c) {
                                         return std::find(p.keys.begin(), p.keys.end(), c) != p.keys.end();
                                     });
                                 },
                                 [](const auto&) { return false; }},
                      prev);
}

inline std::vector<TransformOp> pushFiltersFirst(std::vector<TransformOp> ops) {
    for (bool moved = true; moved;) {
        moved = false;
        for (std::size_t i = 1; i < ops.size(); ++i) {
            const auto* f = std::get_if<FilterOp>(&ops[i]);
            if (f && filterCommutes(ops[i - 1], *f)) {
                std::swap(ops[i - 1], ops[i]);
                moved = true;
            }
        }
    }
    return ops;
}

inline std::vector<TransformOp> pushProjectsLast(std::vector<TransformOp> ops) {
    for (bool moved = true; moved;) {
        moved = false;
        for (std::size_t i = 0; i + 1 < ops.size(); ++i) {
            const auto* p = std::get_if<ProjectOp>(&ops[i]);
            if (!p) continue;
            std::set<std::string> keep(p->columns.begin(), p->columns.end());
            const auto& next = ops[i + 1];
            auto used = referencedColumns(next);
            if (!std::includes(keep.begin(), keep.end(), used.begin(), used.end())) continue;
            if (std::holds_alternative<ProjectOp>(next) || std::holds_alternative<GroupAggregateOp>(next)) {
                ops.erase(ops.begin() + static_cast<std::ptrdiff_t>(i)); // the next op drops the same columns
            } else {
                ProjectOp later = *p;
                for (const auto& c : addedColumns(next))
                    if (!keep.count(c)) later.columns.push_back(c);
                ops[i] = next;
                ops[i + 1] = later;
            }
            moved = true;
            break;
        }
    }
    return ops;
}

} // namespace detail

/// Canonical text of a pipeline: filters first, projections last, sorted keys and
/// aggregates, derived columns renamed in order of definition.
inline std::vector<std::string> pipelineNormalForm(const Pipeline& p, const Schema& input) {
    outputSchema(input, p);
    auto ops = detail::pushProjectsLast(detail::pushFiltersFirst(p.ops));
    // A final projection that keeps every column is the identity.
    if (!ops.empty())
        if (const auto* last = std::get_if<ProjectOp>(&ops.back())) {
            Pipeline before{{ops.begin(), ops.end() - 1}};
            if (last->columns.size() == outputSchema(input, before).size()) ops.pop_back();
        }

    std::map<std::string, std::string> names;
    int next = 0;
    auto fresh = [&](const std::string& original) {
        auto n = "#" + std::to_string(++next);
        names[original] = n;
        return n;
    };
    auto ref = [&](const std::string& c) {
        auto it = names.find(c);
        return it == names.end() ? c : it->second;
    };
    auto refs = [&](std::vector<std::string> cs) {
        for (auto& c : cs) c = ref(c);
        return cs;
    };

    std::vector<std::string> out;
    for (const auto& op : ops) {
        TransformOp renamed = std::visit(
            overloaded{[&](const FilterOp& o) -> TransformOp { return FilterOp{detail::renameExpr(o.predicate, names)}; },
                       [&](const DeriveOp& o) -> TransformOp {
                           auto e = detail::renameExpr(o.expr, names);
                           return DeriveOp{fresh(o.output), e};
                       },
                       [&](const ProjectOp& o) -> TransformOp {
                           auto cs = refs(o.columns);
                           std::sort(cs.begin(), cs.end());
                           return ProjectOp{cs};
                       },
                       [&](const GroupAggregateOp& o) -> TransformOp {
                           GroupAggregateOp g;
                           g.keys = refs(o.keys);
                           std::sort(g.keys.begin(), g.keys.end());
                           auto aggs = o.aggs;
                           for (auto& a : aggs) a.input = a.input.empty() ? "" : ref(a.input);
                           std::stable_sort(aggs.begin(), aggs.end(), [](const Aggregate& x, const Aggregate& y) {
                               return std::pair{x.fn, x.input} < std::pair{y.fn, y.input};
                           });
                           for (auto& a : aggs) a.output = fresh(a.output);
                           g.aggs = aggs;
                           return g;
                       },
                       [&](const NormalizeOp& o) -> TransformOp {
                           auto in = ref(o.input);
                           return NormalizeOp{in, fresh(o.output)};
                       },
                       [&](const StackOp& o) -> TransformOp {
                           StackOp s{ref(o.input), refs(o.orderBy), "", ""};
                           s.lower = fresh(o.lower);
                           s.upper = fresh(o.upper);
                           return s;
                       },
                       [&](const BinningOp& o) -> TransformOp {
                           auto in = ref(o.input);
                           return BinningOp{in, o.width, fresh(o.output)};
                       },
                       [&](const SortOp& o) -> TransformOp {
                           auto s = o;
                           for (auto& k : s.keys) k.column = ref(k.column);
                           return s;
                       },
                       [](const LimitOp& o) -> TransformOp { return o; }},
            op);
        out.push_back(describe(renamed));
    }
    return out;
}

inline bool pipelinesEquivalent(const Pipeline& a, const Pipeline& b, const Schema& input) {
    return pipelineNormalForm(a, input) == pipelineNormalForm(b, input);
}

// ─── Encoding similarity ─────────────────────────────────────────────────

enum class EncodingSimilarity { Identical, SameFamily, Different };

inline std::string_view similarityName(EncodingSimilarity s) {
    switch (s) {
    case EncodingSimilarity::Identical: return "identical";
    case EncodingSimilarity::SameFamily: return "sameFamily";
    case EncodingSimilarity::Different: return "different";
    }
    return "?";
}

/// Identical: same mark and bindings up to scale ranges. Same family: same mark,
/// hence the same coordinate system.
inline EncodingSimilarity encodingsSimilar(const Encoding& a, const Encoding& b) {
    if (a.mark != b.mark || coordinateSystem(a.mark) != coordinateSystem(b.mark)) return EncodingSimilarity::Different;
    if (a.bindings.size() != b.bindings.size()) return EncodingSimilarity::SameFamily;
    for (const auto& [ch, ba] : a.bindings) {
        auto it = b.bindings.find(ch);
        if (it == b.bindings.end()) return EncodingSimilarity::SameFamily;
        const auto& bb = it->second;
        if (ba.attr != bb.attr || ba.scale.isNumeric() != bb.scale.isNumeric()) return EncodingSimilarity::SameFamily;
        if (ba.scale.isNumeric() ? !(ba.scale.interval() == bb.scale.interval())
                                 : ba.scale.categories() != bb.scale.categories())
            return EncodingSimilarity::SameFamily;
    }
    return EncodingSimilarity::Identical;
}

// ─── Comparison ──────────────────────────────────────────────────────────

enum class ComparisonKind { Inappropriate, MeasuresEncoding, MeasuresTransformation, Confounded };

inline std::string_view comparisonName(ComparisonKind k) {
    switch (k) {
    case ComparisonKind::Inappropriate: return "Inappropriate";
    case ComparisonKind::MeasuresEncoding: return "MeasuresEncoding";
    case ComparisonKind::MeasuresTransformation: return "MeasuresTransformation";
    case ComparisonKind::Confounded: return "Confounded";
    }
    return "?";
}

struct Classification {
    ComparisonKind kind = ComparisonKind::Confounded;
    std::vector<std::string> inappropriate; // specs that cannot answer the task, in argument order

    std::string describe() const {
        std::string out(comparisonName(kind));
        if (kind == ComparisonKind::Inappropriate) out += "(" + joinNames(inappropriate) + ")";
        return out;
    }
    bool operator==(const Classification&) const = default;
};

struct AssumptionFlip {
    std::string assumption;
    bool value = false;
    Classification classification;
};

struct Rationale {
    bool pipelinesEqual = false;
    EncodingSimilarity encodingSimilarity = EncodingSimilarity::Different;
    int inversionDelta = 0; // inversions in B's plan minus those in A's
    std::vector<std::string> assumptions;
    std::optional<AssumptionFlip> flip;
};

struct ComparisonReport {
    Classification classification;
    std::string specA, specB;
    ProxyPlan planA, planB;
    Rationale rationale;
};

namespace detail {

inline Classification decide(const ProxyPlan& a, const ProxyPlan& b, const VisSpec& sa, const VisSpec& sb, bool equal,
                             EncodingSimilarity sim) {
    Classification c;
    if (!a.verdict.answerable()) c.inappropriate.push_back(sa.name);
    if (!b.verdict.answerable()) c.inappropriate.push_back(sb.name);
    if (!c.inappropriate.empty()) c.kind = ComparisonKind::Inappropriate;
    else if (equal) c.kind = ComparisonKind::MeasuresEncoding;
    else if (sim != EncodingSimilarity::Different) c.kind = ComparisonKind::MeasuresTransformation;
    else c.kind = ComparisonKind::Confounded;
    return c;
}

} // namespace detail

/// What a study comparing the two charts on task q would measure.
inline ComparisonReport classifyComparison(const VisSpec& a, const VisSpec& b, const TaskQuery& q,
                                           const AnalysisOptions& options = {}) {
    if (!(a.input == b.input))
        fail(ErrorKind::Schema, "specs " + a.name + " and " + b.name + " have different input schemas");
    ComparisonReport r;
    r.specA = a.name;
    r.specB = b.name;
    r.planA = analyze(q, a, options);
    r.planB = analyze(q, b, options);
    r.rationale.pipelinesEqual = pipelinesEquivalent(a.pipeline, b.pipeline, a.input);
    r.rationale.encodingSimilarity = encodingsSimilar(a.encoding, b.encoding);
    r.rationale.inversionDelta =
        static_cast<int>(r.planB.verdict.inversions.size()) - static_cast<int>(r.planA.verdict.inversions.size());
    if (options.knownTotal) r.rationale.assumptions.push_back("known-total");
    r.classification =
        detail::decide(r.planA, r.planB, a, b, r.rationale.pipelinesEqual, r.rationale.encodingSimilarity);

    auto flipped = options;
    flipped.knownTotal = !options.knownTotal;
    auto other = detail::decide(analyze(q, a, flipped), analyze(q, b, flipped), a, b, r.rationale.pipelinesEqual,
                                r.rationale.encodingSimilarity);
    if (!(other == r.classification)) r.rationale.flip = AssumptionFlip{"known-total", flipped.knownTotal, other};
    return r;
}

inline OrderedJson classificationToJson(const Classification& c) {
    OrderedJson j;
    j["kind"] = std::string(comparisonName(c.kind));
    if (c.kind == ComparisonKind::Inappropriate) j["inappropriate"] = c.inappropriate;
    return j;
}

inline OrderedJson comparisonToJson(const ComparisonReport& r) {
    OrderedJson j;
    j["classification"] = classificationToJson(r.classification);
    j["perSpec"] = OrderedJson::array();
    for (const auto& [name, plan] : {std::pair{&r.specA, &r.planA}, std::pair{&r.specB, &r.planB}}) {
        OrderedJson s;
        s["spec"] = *name;
        s["plan"] = planToJson(*plan);
        j["perSpec"].push_back(std::move(s));
    }
    OrderedJson why;
    why["pipelinesEqual"] = r.rationale.pipelinesEqual;
    why["encodingSimilarity"] = std::string(similarityName(r.rationale.encodingSimilarity));
    why["inversionDelta"] = r.rationale.inversionDelta;
    why["assumptions"] = r.rationale.assumptions;
    if (r.rationale.flip) {
        OrderedJson f;
        f["assumption"] = r.rationale.flip->assumption;
        f["value"] = r.rationale.flip->value;
        f["classification"] = classificationToJson(r.rationale.flip->classification);
        why["flip"] = std::move(f);
    }
    j["rationale"] = std::move(why);
    return j;
}

} // namespace vizproxy
