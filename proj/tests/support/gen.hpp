#pragma once

// Hand-rolled generators for property tests.

#include "vizproxy/spec.hpp"
#include "vizproxy/table.hpp"

#include <random>
#include <string>
#include <vector>

namespace vizproxy::gen {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    int integer(int lo, int hi) { return lo + static_cast<int>(eng_() % static_cast<std::uint64_t>(hi - lo + 1)); }
    double real(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(eng_() >> 11) * 0x1.0p-53); }
    bool coin() { return (eng_() & 1) != 0; }
    template <class T>
    const T& pick(const std::vector<T>& xs) {
        return xs[eng_() % xs.size()];
    }

private:
    std::mt19937_64 eng_;
};

inline const std::vector<std::string>& groupNames() {
    static const std::vector<std::string> names = {"A", "B", "C", "D", "E"};
    return names;
}

/// (a:text, b:number) with integer or real values.
inline Table groupValueTable(Rng& rng, int minRows, int maxRows, bool integers = true, int lo = 0, int hi = 9) {
    Schema s({{"a", ValueType::Text}, {"b", ValueType::Number}});
    std::vector<Row> rows;
    int n = rng.integer(minRows, maxRows);
    for (int i = 0; i < n; ++i) {
        double v = integers ? rng.integer(lo, hi) : rng.real(lo, hi);
        rows.push_back({Value{rng.pick(groupNames())}, Value{v}});
    }
    return Table(s, std::move(rows));
}

/// The (a, b) columns as plain pairs for the reference aggregator.
inline std::vector<std::pair<std::string, double>> pairsOf(const Table& t) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& r : t.rows()) out.emplace_back(std::get<std::string>(r[0]), std::get<double>(r[1]));
    return out;
}

/// Random prepared table (k:text, u:number, w:number) with a random encoding over it.
inline std::pair<Table, Encoding> randomEncoded(Rng& rng) {
    Schema s({{"k", ValueType::Text}, {"u", ValueType::Number}, {"w", ValueType::Number}});
    std::vector<Row> rows;
    int n = rng.integer(0, 8);
    for (int i = 0; i < n; ++i)
        rows.push_back({Value{rng.pick(groupNames())}, Value{rng.real(-50, 50)}, Value{rng.real(0, 1)}});
    Table t(s, std::move(rows));

    std::vector<Value> cats;
    for (const auto& g : groupNames()) cats.push_back(Value{g});
    auto range = [&] {
        double lo = rng.real(-500, 500);
        double hi = lo + (rng.coin() ? 1 : -1) * rng.real(1, 500);
        return std::pair{lo, hi};
    };
    Mark mark = rng.pick(std::vector<Mark>{Mark::Point, Mark::Bar, Mark::Arc, Mark::Line});
    Encoding e{mark, {}};
    std::vector<std::string> attrs = {"k", "u", "w"};
    for (auto ch : markChannels(mark)) {
        if (!rng.coin()) continue;
        const auto& attr = rng.pick(attrs);
        auto [lo, hi] = range();
        if (attr == "k") e.bindings.emplace(ch, Binding{attr, LinearScale::categorical(cats, lo, hi)});
        else if (attr == "u") e.bindings.emplace(ch, Binding{attr, LinearScale::numeric(-50, 50, lo, hi)});
        else e.bindings.emplace(ch, Binding{attr, LinearScale::numeric(0, 1, lo, hi)});
    }
    return {t, e};
}

} // namespace vizproxy::gen
