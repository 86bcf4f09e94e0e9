#pragma once

#include "vizproxy/plan.hpp"

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vizproxy {

/// Per-step effort. Reads cost `read` plus `perValueScanCost` for each further value,
/// SumK costs `sum` per addition (k-1), ComputeAggregate costs its unit per value,
/// the arithmetic steps cost their unit per output value, FilterMarks is flat.
struct CostProfile {
    std::map<ProxyOpKind, double> unitCosts;
    double perValueScanCost = 1;
};

struct MetaOp {
    std::string name;
    std::vector<ProxyOpKind> pattern;
    double replacementCost = 0;
};

struct ExpertiseProfile {
    std::string name;
    CostProfile base;
    std::vector<MetaOp> shortcuts;
};

struct OpCost {
    std::size_t op = 0;
    double cost = 0;
    std::optional<std::string> shortcut;
};

struct CostBreakdown {
    double total = 0;
    std::vector<OpCost> perOp;
};

inline CostProfile defaultCostProfile() {
    CostProfile p;
    p.unitCosts = {{ProxyOpKind::FilterMarks, 0.5},     {ProxyOpKind::ReadValue, 1},
                   {ProxyOpKind::SumK, 1},              {ProxyOpKind::Difference, 1},
                   {ProxyOpKind::Ratio, 2},             {ProxyOpKind::InvertStack, 1.5},
                   {ProxyOpKind::InvertNormalize, 2.5}, {ProxyOpKind::ComputeAggregate, 1}};
    p.perValueScanCost = 1;
    return p;
}

inline ExpertiseProfile defaultProfile() { return {"default", defaultCostProfile(), {}}; }

inline void validateProfile(const ExpertiseProfile& p) {
    for (auto k : allProxyOpKinds) {
        auto it = p.base.unitCosts.find(k);
        if (it == p.base.unitCosts.end())
            fail(ErrorKind::Profile, "profile " + p.name + " does not price " + std::string(proxyOpName(k)));
        if (!(it->second >= 0) || !std::isfinite(it->second))
            fail(ErrorKind::Profile, "profile " + p.name + " has a negative or non-finite cost for " +
                                         std::string(proxyOpName(k)));
    }
    if (!(p.base.perValueScanCost >= 0) || !std::isfinite(p.base.perValueScanCost))
        fail(ErrorKind::Profile, "perValueScanCost must be a nonnegative number");
    for (std::size_t i = 0; i < p.shortcuts.size(); ++i) {
        const auto& s = p.shortcuts[i];
        if (s.name.empty()) fail(ErrorKind::Profile, "shortcut without a name");
        if (s.pattern.empty()) fail(ErrorKind::Profile, "shortcut " + s.name + " has an empty pattern");
        if (!(s.replacementCost >= 0) || !std::isfinite(s.replacementCost))
            fail(ErrorKind::Profile, "shortcut " + s.name + " has a negative or non-finite cost");
        for (std::size_t j = 0; j < i; ++j)
            if (p.shortcuts[j].name == s.name) fail(ErrorKind::Profile, "duplicate shortcut " + s.name);
    }
}

inline double unitCost(const CostProfile& p, const ProxyOp& op) {
    auto it = p.unitCosts.find(op.kind);
    if (it == p.unitCosts.end()) fail(ErrorKind::Profile, "unpriced op kind " + std::string(proxyOpName(op.kind)));
    double u = it->second;
    double n = static_cast<double>(op.arity);
    switch (op.kind) {
    case ProxyOpKind::FilterMarks: return u;
    case ProxyOpKind::ReadValue: return u + p.perValueScanCost * std::max(0.0, n - 1);
    case ProxyOpKind::SumK: return u * std::max(0.0, n - 1);
    default: return u * n;
    }
}

/// Spans [begin, end) of ops matched by shortcuts: scanning left to right, at each
/// position the longest matching pattern wins; matched ops are not reused.
struct ShortcutMatch {
    std::size_t begin = 0, end = 0;
    std::string name;
    double replacementCost = 0;
};

inline std::vector<ShortcutMatch> applyShortcuts(const ProxyPlan& plan, const std::vector<MetaOp>& shortcuts) {
    std::vector<ShortcutMatch> out;
    std::size_t i = 0;
    while (i < plan.ops.size()) {
        const MetaOp* best = nullptr;
        for (const auto& m : shortcuts) {
            if (m.pattern.empty() || i + m.pattern.size() > plan.ops.size()) continue;
            bool match = true;
            for (std::size_t k = 0; k < m.pattern.size() && match; ++k) match = plan.ops[i + k].kind == m.pattern[k];
            if (match && (!best || m.pattern.size() > best->pattern.size())) best = &m;
        }
        if (best) {
            out.push_back({i, i + best->pattern.size(), best->name, best->replacementCost});
            i += best->pattern.size();
        } else {
            ++i;
        }
    }
    return out;
}

inline CostBreakdown costPlan(const ProxyPlan& plan, const ExpertiseProfile& profile) {
    if (!plan.verdict.answerable()) fail(ErrorKind::Profile, "an impossible plan has no finite cost");
    CostBreakdown b;
    auto matches = applyShortcuts(plan, profile.shortcuts);
    std::size_t m = 0;
    for (std::size_t i = 0; i < plan.ops.size(); ++i) {
        while (m < matches.size() && matches[m].end <= i) ++m;
        if (m < matches.size() && matches[m].begin <= i) {
            b.perOp.push_back({i, i == matches[m].begin ? matches[m].replacementCost : 0.0, matches[m].name});
        } else {
            b.perOp.push_back({i, unitCost(profile.base, plan.ops[i]), std::nullopt});
        }
    }
    for (const auto& c : b.perOp) b.total += c.cost;
    return b;
}

// ─── Config files ────────────────────────────────────────────────────────

inline ExpertiseProfile profileFromJson(const Json& j) {
    if (!j.is_object()) fail(ErrorKind::Profile, "profile must be an object");
    for (const auto& [key, _] : j.items())
        if (key != "name" && key != "unitCosts" && key != "perValueScanCost" && key != "shortcuts")
            fail(ErrorKind::Profile, "unknown profile field '" + key + "'");
    ExpertiseProfile p;
    p.name = j.value("name", "custom");
    if (!j.contains("unitCosts") || !j["unitCosts"].is_object()) fail(ErrorKind::Profile, "profile needs unitCosts");
    for (const auto& [key, v] : j["unitCosts"].items()) {
        auto k = parseProxyOpName(key);
        if (!k) fail(ErrorKind::Profile, "unknown op kind '" + key + "' in unitCosts");
        if (!v.is_number()) fail(ErrorKind::Profile, "cost of " + key + " must be a number");
        p.base.unitCosts[*k] = v.get<double>();
    }
    if (j.contains("perValueScanCost")) {
        if (!j["perValueScanCost"].is_number()) fail(ErrorKind::Profile, "perValueScanCost must be a number");
        p.base.perValueScanCost = j["perValueScanCost"].get<double>();
    }
    if (j.contains("shortcuts")) {
        if (!j["shortcuts"].is_array()) fail(ErrorKind::Profile, "shortcuts must be an array");
        for (const auto& s : j["shortcuts"]) {
            MetaOp m;
            if (!s.is_object() || !s.contains("name") || !s.contains("pattern") || !s.contains("replacementCost"))
                fail(ErrorKind::Profile, "shortcut needs name, pattern and replacementCost");
            m.name = s["name"].get<std::string>();
            for (const auto& k : s["pattern"]) {
                auto kind = k.is_string() ? parseProxyOpName(k.get<std::string>()) : std::nullopt;
                if (!kind) fail(ErrorKind::Profile, "unknown op kind in pattern of shortcut " + m.name);
                m.pattern.push_back(*kind);
            }
            if (!s["replacementCost"].is_number())
                fail(ErrorKind::Profile, "replacementCost of shortcut " + m.name + " must be a number");
            m.replacementCost = s["replacementCost"].get<double>();
            p.shortcuts.push_back(std::move(m));
        }
    }
    validateProfile(p);
    return p;
}

inline ExpertiseProfile parseProfile(std::string_view text) { return profileFromJson(parseJsonText(text)); }

inline OrderedJson profileToJson(const ExpertiseProfile& p) {
    OrderedJson j;
    j["name"] = p.name;
    j["unitCosts"] = OrderedJson::object();
    for (auto k : allProxyOpKinds)
        if (auto it = p.base.unitCosts.find(k); it != p.base.unitCosts.end())
            j["unitCosts"][std::string(proxyOpName(k))] = it->second;
    j["perValueScanCost"] = p.base.perValueScanCost;
    j["shortcuts"] = OrderedJson::array();
    for (const auto& s : p.shortcuts) {
        OrderedJson m;
        m["name"] = s.name;
        m["pattern"] = OrderedJson::array();
        for (auto k : s.pattern) m["pattern"].push_back(proxyOpName(k));
        m["replacementCost"] = s.replacementCost;
        j["shortcuts"].push_back(std::move(m));
    }
    return j;
}

inline OrderedJson costToJson(const CostBreakdown& b, const ProxyPlan& plan) {
    OrderedJson j;
    j["total"] = b.total;
    j["perOp"] = OrderedJson::array();
    for (const auto& c : b.perOp) {
        OrderedJson o;
        o["op"] = plan.ops[c.op].describe();
        o["cost"] = c.cost;
        if (c.shortcut) o["shortcut"] = *c.shortcut;
        j["perOp"].push_back(std::move(o));
    }
    return j;
}

} // namespace vizproxy
