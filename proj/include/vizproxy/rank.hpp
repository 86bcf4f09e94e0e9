#pragma once

#include "vizproxy/cost.hpp"
#include "vizproxy/rewrite.hpp"

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

namespace vizproxy {

struct RankEntry {
    std::string spec;
    ProxyPlan plan;
    std::optional<CostBreakdown> cost; // empty for Impossible: infinite
};

inline bool rankedBefore(const RankEntry& a, const RankEntry& b) {
    if (a.cost.has_value() != b.cost.has_value()) return a.cost.has_value();
    if (a.cost && a.cost->total != b.cost->total) return a.cost->total < b.cost->total;
    return a.spec < b.spec;
}

/// Null-model ordering of charts for one task: cheapest plan first, Impossible last.
inline std::vector<RankEntry> rankVisualizations(const TaskQuery& q, const std::vector<VisSpec>& specs,
                                                 const ExpertiseProfile& profile, const AnalysisOptions& options = {}) {
    validateProfile(profile);
    std::vector<RankEntry> out;
    for (const auto& s : specs) {
        RankEntry e{s.name, analyze(q, s, options), std::nullopt};
        if (e.plan.verdict.answerable()) e.cost = costPlan(e.plan, profile);
        out.push_back(std::move(e));
    }
    std::stable_sort(out.begin(), out.end(), rankedBefore);
    return out;
}

inline OrderedJson costValueToJson(const std::optional<CostBreakdown>& c) {
    return c ? OrderedJson(c->total) : OrderedJson("inf");
}

inline OrderedJson rankingToJson(const std::vector<RankEntry>& ranking) {
    OrderedJson j = OrderedJson::array();
    for (std::size_t i = 0; i < ranking.size(); ++i) {
        const auto& e = ranking[i];
        OrderedJson o;
        o["rank"] = i + 1;
        o["spec"] = e.spec;
        o["verdict"] = verdictToJson(e.plan.verdict);
        o["cost"] = costValueToJson(e.cost);
        o["plan"] = e.plan.describe();
        j.push_back(std::move(o));
    }
    return j;
}

} // namespace vizproxy
