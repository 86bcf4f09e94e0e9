#pragma once

#include "vizproxy/spec.hpp"

#include <optional>
#include <vector>

namespace vizproxy {

/// V = e(P): one mark row per prepared row, channel values in range units.
/// Null attribute values stay empty; unbound channels hold the mark default.
struct MarkTable {
    Mark mark = Mark::Point;
    std::vector<Channel> channels;
    std::vector<bool> bound;
    std::vector<std::vector<std::optional<double>>> rows;

    std::size_t size() const { return rows.size(); }

    std::optional<std::size_t> channelIndex(Channel c) const {
        for (std::size_t i = 0; i < channels.size(); ++i)
            if (channels[i] == c) return i;
        return std::nullopt;
    }
};

inline MarkTable encode(const Table& prepared, const Encoding& e) {
    checkEncoding(e, prepared.schema());
    MarkTable v;
    v.mark = e.mark;
    v.channels = markChannels(e.mark);
    std::vector<std::optional<std::size_t>> source;
    for (auto ch : v.channels) {
        auto it = e.bindings.find(ch);
        v.bound.push_back(it != e.bindings.end());
        source.push_back(it != e.bindings.end() ? prepared.schema().indexOf(it->second.attr) : std::nullopt);
    }
    v.rows.reserve(prepared.rowCount());
    for (const auto& row : prepared.rows()) {
        std::vector<std::optional<double>> mark;
        for (std::size_t c = 0; c < v.channels.size(); ++c) {
            if (!source[c]) {
                mark.push_back(channelDefault(e.mark, v.channels[c]));
                continue;
            }
            const Value& val = row[*source[c]];
            if (isNull(val)) mark.push_back(std::nullopt);
            else mark.push_back(e.bindings.at(v.channels[c]).scale.apply(val));
        }
        v.rows.push_back(std::move(mark));
    }
    return v;
}

/// Reconstructs the bound attributes from marks by inverse scaling. Columns follow the
/// mark's channel order; an attribute bound twice is read from its first channel.
inline Table decodeMarks(const MarkTable& v, const Encoding& e) {
    std::vector<Column> cols;
    std::vector<std::pair<std::size_t, const LinearScale*>> sources;
    for (std::size_t c = 0; c < v.channels.size(); ++c) {
        auto it = e.bindings.find(v.channels[c]);
        if (it == e.bindings.end()) continue;
        const auto& b = it->second;
        if (!b.scale.invertible())
            fail(ErrorKind::NotInvertible, "channel " + std::string(channelName(it->first)) + " scale range [" +
                                               formatNumber(b.scale.rangeLo()) + ", " +
                                               formatNumber(b.scale.rangeHi()) + "] is degenerate");
        bool seen = std::any_of(cols.begin(), cols.end(), [&](const Column& col) { return col.name == b.attr; });
        if (seen) continue;
        ValueType type = b.scale.isNumeric() ? ValueType::Number : *typeOf(b.scale.categories().front());
        cols.push_back({b.attr, type});
        sources.emplace_back(c, &b.scale);
    }
    std::vector<Row> rows;
    rows.reserve(v.rows.size());
    for (const auto& mark : v.rows) {
        Row r;
        for (auto [c, scale] : sources) r.push_back(mark[c] ? scale->invert(*mark[c]) : Value{});
        rows.push_back(std::move(r));
    }
    return Table(Schema(std::move(cols)), std::move(rows));
}

} // namespace vizproxy
