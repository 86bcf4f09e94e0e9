#pragma once

#include "vizproxy/spec.hpp"

#include <string_view>
#include <vector>

namespace vizproxy {

inline Schema galleryInputSchema() { return Schema({{"a", ValueType::Text}, {"b", ValueType::Number}}); }

namespace detail {

inline LinearScale groupScale(double lo, double hi) {
    return LinearScale::categorical({Value{"A"}, Value{"B"}, Value{"C"}, Value{"D"}}, lo, hi);
}

inline Pipeline groupSums() { return Pipeline{{GroupAggregateOp{{"a"}, {{AggFn::Sum, "b", "c"}}}}}; }

inline Pipeline stackedPercentages() {
    Pipeline p = groupSums();
    p.ops.push_back(NormalizeOp{"c", "perc"});
    p.ops.push_back(StackOp{"perc", {"a"}, "d0", "d"});
    return p;
}

} // namespace detail

/// The four basic charts over D(a:text, b:number).
/// Scales assume groups A..D and values in [0, 10]; stacks are ordered by a.
inline std::vector<VisSpec> gallery() {
    using detail::groupScale;
    std::vector<VisSpec> out;

    VisSpec scatter{"scatter", galleryInputSchema(), Pipeline{}, Encoding{Mark::Point, {}}};
    scatter.encoding.bindings.emplace(Channel::X, Binding{"a", groupScale(0, 400)});
    scatter.encoding.bindings.emplace(Channel::Y, Binding{"b", LinearScale::numeric(0, 10, 0, 300)});
    out.push_back(std::move(scatter));

    VisSpec bar{"bar", galleryInputSchema(), detail::groupSums(), Encoding{Mark::Bar, {}}};
    bar.encoding.bindings.emplace(Channel::X, Binding{"a", groupScale(0, 400)});
    bar.encoding.bindings.emplace(Channel::Y, Binding{"c", LinearScale::numeric(0, 10, 0, 300)});
    out.push_back(std::move(bar));

    VisSpec pie{"pie", galleryInputSchema(), detail::stackedPercentages(), Encoding{Mark::Arc, {}}};
    pie.encoding.bindings.emplace(Channel::ThetaExtent, Binding{"perc", LinearScale::numeric(0, 1, 0, 360)});
    pie.encoding.bindings.emplace(Channel::Color, Binding{"a", groupScale(0, 360)});
    out.push_back(std::move(pie));

    VisSpec stacked{"propStacked", galleryInputSchema(), detail::stackedPercentages(), Encoding{Mark::Bar, {}}};
    stacked.encoding.bindings.emplace(Channel::Y, Binding{"d0", LinearScale::numeric(0, 1, 0, 300)});
    stacked.encoding.bindings.emplace(Channel::Y2, Binding{"d", LinearScale::numeric(0, 1, 0, 300)});
    stacked.encoding.bindings.emplace(Channel::Color, Binding{"a", groupScale(0, 360)});
    out.push_back(std::move(stacked));

    for (const auto& s : out) checkSpec(s);
    return out;
}

inline VisSpec gallerySpec(std::string_view name) {
    for (auto& s : gallery())
        if (s.name == name) return s;
    fail(ErrorKind::Schema, "no gallery spec named " + std::string(name));
}

} // namespace vizproxy
