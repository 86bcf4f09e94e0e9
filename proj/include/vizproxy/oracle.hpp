#pragma once

#include "vizproxy/plan.hpp"
#include "vizproxy/spec.hpp"
#include "vizproxy/task.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace vizproxy {

/// Bounded source of random datasets. Text columns draw from groupDomain, number
/// columns from valueRange (integers unless floatMode), booleans from a coin.
struct DatasetFamily {
    Schema schema;
    std::vector<std::string> groupDomain;
    int minRows = 0, maxRows = 8;
    int valueLo = 0, valueHi = 9;
    std::uint64_t seed = 0;
    bool floatMode = false;

    void validate() const {
        if (groupDomain.empty() || groupDomain.size() > 4)
            fail(ErrorKind::Harness, "group domain must have 1 to 4 values");
        if (minRows < 0 || minRows > maxRows || maxRows > 8) fail(ErrorKind::Harness, "row range must lie within [0, 8]");
        if (valueLo > valueHi) fail(ErrorKind::Harness, "empty value range");
    }

    /// Inequality threshold for task answers: exact in integer mode, 100x eps with floats.
    double distinctBeyond(double eps) const { return floatMode ? 100 * eps : eps; }
};

inline DatasetFamily galleryFamily(std::uint64_t seed = 1) {
    return {Schema({{"a", ValueType::Text}, {"b", ValueType::Number}}), {"A", "B", "C"}, 1, 8, 0, 9, seed, false};
}

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline Value sampleValue(const DatasetFamily& f, ValueType t, std::mt19937_64& rng) {
    switch (t) {
    case ValueType::Text: return Value{f.groupDomain[std::uniform_int_distribution<std::size_t>(0, f.groupDomain.size() - 1)(rng)]};
    case ValueType::Boolean: return Value{std::uniform_int_distribution<int>(0, 1)(rng) == 1};
    case ValueType::Number:
        if (f.floatMode) return Value{std::uniform_real_distribution<double>(f.valueLo, f.valueHi)(rng)};
        return Value{static_cast<double>(std::uniform_int_distribution<int>(f.valueLo, f.valueHi)(rng))};
    }
    return Value{};
}

} // namespace detail

/// Deterministic in (family, index); samples do not depend on each other.
inline Table sampleDataset(const DatasetFamily& f, std::uint64_t index) {
    f.validate();
    std::mt19937_64 rng(detail::splitmix(f.seed ^ detail::splitmix(index)));
    int n = std::uniform_int_distribution<int>(f.minRows, f.maxRows)(rng);
    std::vector<Row> rows;
    for (int i = 0; i < n; ++i) {
        Row r;
        for (const auto& c : f.schema.columns()) r.push_back(detail::sampleValue(f, c.type, rng));
        rows.push_back(std::move(r));
    }
    return Table(f.schema, std::move(rows));
}

// ─── Proxy verification ──────────────────────────────────────────────────

struct VerificationFailure {
    std::uint64_t trial = 0;
    Table dataset;
    std::string expected;
    std::string got;
};

struct VerificationResult {
    std::size_t trials = 0;
    std::size_t skipped = 0;
    std::vector<VerificationFailure> failures;
    bool passed() const { return failures.empty(); }
};

/// The table a reader of the chart has: P, or its readable projection.
inline Table visibleTable(const VisSpec& spec, const Table& prepared, bool viewLevel) {
    return viewLevel ? readableProjection(prepared, readableAttributes(spec)) : prepared;
}

inline bool isEvaluationError(const Error& e) {
    return e.kind() == ErrorKind::Eval || e.kind() == ErrorKind::Extraction;
}

/// Compares q(D) with the plan run on f(D) for n sampled datasets. Samples where q or
/// f cannot be evaluated are skipped; a plan that errors where q succeeds is a failure.
inline VerificationResult verifyProxy(const TaskQuery& q, const VisSpec& spec, const ProxyPlan& plan,
                                      const DatasetFamily& family, std::size_t n, double eps) {
    if (!plan.verdict.answerable()) fail(ErrorKind::Harness, "cannot verify a plan for an impossible verdict");
    family.validate();
    if (!(family.schema == q.input)) fail(ErrorKind::Harness, "dataset family schema differs from the task input");
    VerificationResult res;
    for (std::uint64_t i = 0; i < n; ++i) {
        ++res.trials;
        Table d = sampleDataset(family, i);
        std::optional<TaskResult> expected;
        std::optional<Table> prepared;
        try {
            expected = evaluateTask(q, d);
            prepared = executePipeline(d, spec.pipeline);
        } catch (const Error& e) {
            if (!isEvaluationError(e)) throw;
            ++res.skipped;
            continue;
        }
        Table view = visibleTable(spec, *prepared, plan.viewLevel);
        try {
            auto got = executePlan(plan, view, PlanContext::fromData(d));
            if (!resultsClose(*expected, got, eps)) res.failures.push_back({i, d, describe(*expected), describe(got)});
        } catch (const Error& e) {
            if (!isEvaluationError(e)) throw;
            res.failures.push_back({i, d, describe(*expected), std::string("error: ") + e.what()});
        }
    }
    return res;
}

// ─── Counterexample search ───────────────────────────────────────────────

struct Counterexample {
    Table d1, d2;
    Table view; // shared visible prepared table
    TaskResult q1, q2;
    std::string construction;
    std::size_t candidates = 0; // candidates examined, including the witness
};

namespace detail {

inline std::optional<std::pair<Table, TaskResult>> observe(const TaskQuery& q, const VisSpec& spec, const Table& d,
                                                           bool viewLevel) {
    try {
        auto r = evaluateTask(q, d);
        auto p = executePipeline(d, spec.pipeline);
        return std::pair{canonicalize(visibleTable(spec, p, viewLevel)), r};
    } catch (const Error& e) {
        if (!isEvaluationError(e)) throw;
        return std::nullopt;
    }
}

inline bool resultsDistinct(const TaskResult& a, const TaskResult& b, double threshold) {
    return !resultsClose(a, b, threshold);
}

struct Variant {
    std::string name;
    Table d;
};

inline bool sameGroup(const Schema& s, const Row& x, const Row& y) {
    for (std::size_t c = 0; c < s.size(); ++c)
        if (s[c].type != ValueType::Number && x[c] != y[c]) return false;
    return true;
}

/// The cataloged constructions applied to one base dataset, in a fixed order.
inline std::vector<Variant> constructions(const Table& base, const DatasetFamily& f) {
    std::vector<Variant> out;
    const auto& s = base.schema();
    const auto& rows = base.rows();
    std::vector<std::size_t> nums;
    for (std::size_t c = 0; c < s.size(); ++c)
        if (s[c].type == ValueType::Number) nums.push_back(c);
    auto num = [](const Value& v) { return isNull(v) ? 0.0 : std::get<double>(v); };

    // merge-rows: two rows of one group become one carrying their sums.
    for (std::size_t i = 0; i < rows.size() && out.empty(); ++i)
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            if (!sameGroup(s, rows[i], rows[j])) continue;
            std::vector<Row> r;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                if (k == j) continue;
                Row row = rows[k];
                if (k == i)
                    for (auto c : nums) row[c] = Value{num(rows[i][c]) + num(rows[j][c])};
                r.push_back(std::move(row));
            }
            out.push_back({"merge-rows", Table(s, std::move(r))});
            break;
        }
    // rescale-one-row: one value moves, everything else stays.
    if (!rows.empty() && !nums.empty()) {
        auto r = rows;
        double v = num(r[0][nums[0]]);
        r[0][nums[0]] = Value{v == f.valueHi ? static_cast<double>(f.valueLo) : v + 1};
        if (v != std::get<double>(r[0][nums[0]])) out.push_back({"rescale-one-row", Table(s, std::move(r))});
    }
    // preserve-sum: shift one unit between two rows of a group.
    for (std::size_t i = 0; i < rows.size() && !nums.empty(); ++i) {
        bool done = false;
        for (std::size_t j = i + 1; j < rows.size() && !done; ++j) {
            if (!sameGroup(s, rows[i], rows[j])) continue;
            auto r = rows;
            auto c = nums[0];
            r[i][c] = Value{num(rows[i][c]) + 1};
            r[j][c] = Value{num(rows[j][c]) - 1};
            out.push_back({"preserve-sum", Table(s, std::move(r))});
            done = true;
        }
        if (done) break;
    }
    // scale-all: every number doubled, so every share is unchanged.
    if (!rows.empty() && !nums.empty()) {
        auto r = rows;
        for (auto& row : r)
            for (auto c : nums) row[c] = Value{num(row[c]) * 2};
        out.push_back({"scale-all", Table(s, std::move(r))});
    }
    // relabel: one row's text value changes.
    std::vector<std::size_t> texts;
    for (std::size_t c = 0; c < s.size(); ++c)
        if (s[c].type == ValueType::Text) texts.push_back(c);
    for (auto c : texts) {
        if (rows.empty() || f.groupDomain.size() < 2) break;
        auto r = rows;
        const auto& cur = std::get<std::string>(r[0][c]);
        auto it = std::find(f.groupDomain.begin(), f.groupDomain.end(), cur);
        std::size_t next = it == f.groupDomain.end() ? 0 : (static_cast<std::size_t>(it - f.groupDomain.begin()) + 1) % f.groupDomain.size();
        r[0][c] = Value{f.groupDomain[next]};
        out.push_back({"relabel-" + s[c].name, Table(s, std::move(r))});
    }
    return out;
}

/// Two equal rows of the first group; the smallest base on which merging changes counts.
inline std::optional<Table> canonicalBase(const DatasetFamily& f) {
    if (f.maxRows < 2) return std::nullopt;
    double v = std::max(f.valueLo, 1);
    if (2 * v > f.valueHi) return std::nullopt;
    std::vector<Row> rows(2);
    for (auto& r : rows)
        for (const auto& c : f.schema.columns()) {
            if (c.type == ValueType::Text) r.push_back(Value{f.groupDomain[0]});
            else if (c.type == ValueType::Number) r.push_back(Value{v});
            else r.push_back(Value{false});
        }
    return Table(f.schema, std::move(rows));
}

} // namespace detail

/// Re-executes f and q on both datasets and checks the witness property.
inline bool certifyCounterexample(const TaskQuery& q, const VisSpec& spec, const Table& d1, const Table& d2,
                                  bool viewLevel, double threshold, double eps = 1e-9) {
    auto a = detail::observe(q, spec, d1, viewLevel);
    auto b = detail::observe(q, spec, d2, viewLevel);
    if (!a || !b) return false;
    return tablesEqual(a->first, b->first, eps) && detail::resultsDistinct(a->second, b->second, threshold);
}

/// Looks for D1, D2 that look identical in the chart but answer q differently.
/// Targeted constructions come first, then random samples bucketed by what they show.
inline std::optional<Counterexample> searchCounterexample(const TaskQuery& q, const VisSpec& spec,
                                                          const DatasetFamily& family, std::size_t budget,
                                                          bool viewLevel = true) {
    if (budget == 0) fail(ErrorKind::Harness, "search budget must be positive");
    family.validate();
    const double eps = 1e-9;
    const double threshold = family.distinctBeyond(eps);
    std::size_t used = 0;

    auto tryPair = [&](const Table& d1, const Table& d2, const std::string& name) -> std::optional<Counterexample> {
        ++used;
        auto a = detail::observe(q, spec, d1, viewLevel);
        auto b = detail::observe(q, spec, d2, viewLevel);
        if (!a || !b || !tablesEqual(a->first, b->first, eps) || !detail::resultsDistinct(a->second, b->second, threshold))
            return std::nullopt;
        if (!certifyCounterexample(q, spec, d1, d2, viewLevel, threshold, eps)) return std::nullopt;
        return Counterexample{d1, d2, a->first, a->second, b->second, name, used};
    };

    if (auto base = detail::canonicalBase(family))
        for (const auto& v : detail::constructions(*base, family)) {
            if (used >= budget) return std::nullopt;
            if (auto w = tryPair(*base, v.d, v.name)) return w;
        }

    struct Seen {
        Table d;
        TaskResult r;
    };
    std::map<std::string, std::vector<Seen>> buckets;
    for (std::uint64_t i = 0; used < budget; ++i) {
        Table d = sampleDataset(family, i);
        for (const auto& v : detail::constructions(d, family)) {
            if (used >= budget) return std::nullopt;
            if (auto w = tryPair(d, v.d, v.name)) return w;
        }
        if (used >= budget) return std::nullopt;
        ++used;
        auto o = detail::observe(q, spec, d, viewLevel);
        if (!o) continue;
        auto& bucket = buckets[describe(o->first)];
        for (const auto& s : bucket) {
            if (!detail::resultsDistinct(s.r, o->second, threshold)) continue;
            if (certifyCounterexample(q, spec, s.d, d, viewLevel, threshold, eps))
                return Counterexample{s.d, d, o->first, s.r, o->second, "random", used};
        }
        if (bucket.size() < 8) bucket.push_back({d, o->second});
    }
    return std::nullopt;
}

// ─── Serialization ───────────────────────────────────────────────────────

inline OrderedJson tableToJson(const Table& t) {
    OrderedJson j;
    j["schema"] = schemaToJson(t.schema());
    j["rows"] = OrderedJson::array();
    for (const auto& r : t.rows()) {
        OrderedJson row = OrderedJson::array();
        for (const auto& v : r) row.push_back(detail::valueToJson(v));
        j["rows"].push_back(std::move(row));
    }
    return j;
}

inline OrderedJson resultToJson(const TaskResult& r) {
    if (const auto* t = std::get_if<Table>(&r)) return tableToJson(*t);
    return detail::valueToJson(std::get<Value>(r));
}

inline OrderedJson verificationToJson(const VerificationResult& v) {
    OrderedJson j;
    j["passed"] = v.passed();
    j["trials"] = v.trials;
    j["skipped"] = v.skipped;
    j["failures"] = OrderedJson::array();
    for (const auto& f : v.failures) {
        OrderedJson o;
        o["trial"] = f.trial;
        o["dataset"] = tableToJson(f.dataset);
        o["expected"] = f.expected;
        o["got"] = f.got;
        j["failures"].push_back(std::move(o));
    }
    return j;
}

inline OrderedJson counterexampleToJson(const Counterexample& c) {
    OrderedJson j;
    j["construction"] = c.construction;
    j["candidates"] = c.candidates;
    j["d1"] = tableToJson(c.d1);
    j["d2"] = tableToJson(c.d2);
    j["view"] = tableToJson(c.view);
    j["q1"] = resultToJson(c.q1);
    j["q2"] = resultToJson(c.q2);
    return j;
}

} // namespace vizproxy
