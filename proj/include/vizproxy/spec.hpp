#pragma once

#include "vizproxy/pipeline.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace vizproxy {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

// ─── Channels & marks ────────────────────────────────────────────────────

enum class Channel { X, Y, Y2, Color, Size, ThetaExtent };
enum class Mark { Point, Bar, Arc, Line };

inline std::string_view channelName(Channel c) {
    switch (c) {
    case Channel::X: return "x";
    case Channel::Y: return "y";
    case Channel::Y2: return "y2";
    case Channel::Color: return "color";
    case Channel::Size: return "size";
    case Channel::ThetaExtent: return "thetaExtent";
    }
    return "?";
}

inline std::optional<Channel> parseChannel(std::string_view s) {
    for (auto c : {Channel::X, Channel::Y, Channel::Y2, Channel::Color, Channel::Size, Channel::ThetaExtent})
        if (channelName(c) == s) return c;
    return std::nullopt;
}

inline std::string_view markName(Mark m) {
    switch (m) {
    case Mark::Point: return "point";
    case Mark::Bar: return "bar";
    case Mark::Arc: return "arc";
    case Mark::Line: return "line";
    }
    return "?";
}

inline std::optional<Mark> parseMark(std::string_view s) {
    for (auto m : {Mark::Point, Mark::Bar, Mark::Arc, Mark::Line})
        if (markName(m) == s) return m;
    return std::nullopt;
}

/// Channels a mark accepts, in the column order used by mark tables.
inline const std::vector<Channel>& markChannels(Mark m) {
    static const std::vector<Channel> point = {Channel::X, Channel::Y, Channel::Color, Channel::Size};
    static const std::vector<Channel> bar = {Channel::X, Channel::Y, Channel::Y2, Channel::Color};
    static const std::vector<Channel> arc = {Channel::ThetaExtent, Channel::Color};
    static const std::vector<Channel> line = {Channel::X, Channel::Y, Channel::Color};
    switch (m) {
    case Mark::Point: return point;
    case Mark::Bar: return bar;
    case Mark::Arc: return arc;
    case Mark::Line: return line;
    }
    return point;
}

inline double channelDefault(Mark m, Channel c) {
    if (m == Mark::Point && c == Channel::Size) return 30.0;
    return 0.0;
}

enum class CoordinateSystem { Cartesian, Polar };

inline CoordinateSystem coordinateSystem(Mark m) {
    return m == Mark::Arc ? CoordinateSystem::Polar : CoordinateSystem::Cartesian;
}

// ─── Scales ──────────────────────────────────────────────────────────────

/// Linear map from an attribute domain to a range in pixel/degree units.
/// Categorical domains map value i of n to the centre of band i.
class LinearScale {
public:
    struct Interval {
        double lo = 0;
        double hi = 1;
        bool operator==(const Interval&) const = default;
    };

    static LinearScale numeric(double lo, double hi, double rangeLo, double rangeHi) {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
            fail(ErrorKind::Schema, "numeric scale domain needs lo < hi");
        return LinearScale(Interval{lo, hi}, rangeLo, rangeHi);
    }

    static LinearScale categorical(std::vector<Value> values, double rangeLo, double rangeHi) {
        if (values.empty()) fail(ErrorKind::Schema, "categorical scale domain is empty");
        std::set<Value> seen;
        for (const auto& v : values) {
            if (isNull(v)) fail(ErrorKind::Schema, "categorical scale domain contains null");
            if (!seen.insert(v).second) fail(ErrorKind::Schema, "categorical scale domain repeats " + toString(v));
        }
        return LinearScale(std::move(values), rangeLo, rangeHi);
    }

    bool isNumeric() const { return std::holds_alternative<Interval>(domain_); }
    const Interval& interval() const { return std::get<Interval>(domain_); }
    const std::vector<Value>& categories() const { return std::get<std::vector<Value>>(domain_); }
    double rangeLo() const { return rangeLo_; }
    double rangeHi() const { return rangeHi_; }

    LinearScale withRange(double lo, double hi) const {
        LinearScale s = *this;
        s.rangeLo_ = lo;
        s.rangeHi_ = hi;
        return s;
    }

    bool invertible() const { return rangeLo_ != rangeHi_; }

    /// Values outside the domain are an error, never clamped. Numeric domains accept
    /// overshoot up to 1e-9 of their width to absorb rounding in cumulative sums.
    double apply(const Value& v) const {
        if (isNumeric()) {
            auto* d = std::get_if<double>(&v);
            if (!d) fail(ErrorKind::Range, "numeric scale applied to " + toLiteral(v));
            const auto& iv = interval();
            double slack = 1e-9 * (iv.hi - iv.lo);
            if (*d < iv.lo - slack || *d > iv.hi + slack)
                fail(ErrorKind::Range, "value " + formatNumber(*d) + " outside scale domain [" + formatNumber(iv.lo) +
                                           ", " + formatNumber(iv.hi) + "]");
            return rangeLo_ + (*d - iv.lo) / (iv.hi - iv.lo) * (rangeHi_ - rangeLo_);
        }
        const auto& cats = categories();
        auto it = std::find(cats.begin(), cats.end(), v);
        if (it == cats.end()) fail(ErrorKind::Range, "value " + toLiteral(v) + " not in categorical scale domain");
        double n = static_cast<double>(cats.size());
        double i = static_cast<double>(it - cats.begin());
        return rangeLo_ + (i + 0.5) / n * (rangeHi_ - rangeLo_);
    }

    Value invert(double r) const {
        if (!invertible())
            fail(ErrorKind::NotInvertible, "scale range [" + formatNumber(rangeLo_) + ", " + formatNumber(rangeHi_) +
                                               "] is degenerate");
        double t = (r - rangeLo_) / (rangeHi_ - rangeLo_);
        if (isNumeric()) return number(interval().lo + t * (interval().hi - interval().lo));
        const auto& cats = categories();
        double pos = t * static_cast<double>(cats.size()) - 0.5;
        auto i = static_cast<long>(std::lround(pos));
        if (i < 0 || i >= static_cast<long>(cats.size()))
            fail(ErrorKind::Range, "position " + formatNumber(r) + " outside categorical range");
        return cats[static_cast<std::size_t>(i)];
    }

    /// Scale equality ignoring the range.
    bool sameDomain(const LinearScale& o) const { return domain_ == o.domain_; }

private:
    LinearScale(std::variant<Interval, std::vector<Value>> domain, double rlo, double rhi)
        : domain_(std::move(domain)), rangeLo_(rlo), rangeHi_(rhi) {
        if (!std::isfinite(rlo) || !std::isfinite(rhi)) fail(ErrorKind::Schema, "scale range must be finite");
    }

    std::variant<Interval, std::vector<Value>> domain_;
    double rangeLo_ = 0;
    double rangeHi_ = 1;
};

// ─── Encoding & spec ─────────────────────────────────────────────────────

struct Binding {
    std::string attr;
    LinearScale scale;
};

struct Encoding {
    Mark mark = Mark::Point;
    std::map<Channel, Binding> bindings;
};

/// A visualization as (f, e): the design-specific pipeline and the row-wise encoding.
struct VisSpec {
    std::string name;
    Schema input;
    Pipeline pipeline;
    Encoding encoding;

    Schema preparedSchema() const { return outputSchema(input, pipeline); }
};

inline void checkEncoding(const Encoding& e, const Schema& prepared) {
    const auto& allowed = markChannels(e.mark);
    for (const auto& [ch, b] : e.bindings) {
        if (std::find(allowed.begin(), allowed.end(), ch) == allowed.end())
            fail(ErrorKind::Schema, "channel " + std::string(channelName(ch)) + " not allowed for mark " +
                                        std::string(markName(e.mark)));
        auto idx = prepared.indexOf(b.attr);
        if (!idx)
            fail(ErrorKind::Schema, "unknown column " + b.attr + " in prepared schema " + prepared.describe());
        auto type = prepared[*idx].type;
        if (b.scale.isNumeric()) {
            if (type != ValueType::Number)
                fail(ErrorKind::Schema, "numeric scale on " + std::string(typeName(type)) + " column " + b.attr);
        } else {
            for (const auto& v : b.scale.categories())
                if (typeOf(v) != type)
                    fail(ErrorKind::Schema, "categorical domain value " + toLiteral(v) + " does not match column " +
                                                b.attr + " of type " + std::string(typeName(type)));
        }
    }
}

/// Schema-checks the whole spec; returns the prepared schema.
inline Schema checkSpec(const VisSpec& s) {
    Schema prepared = s.preparedSchema();
    checkEncoding(s.encoding, prepared);
    return prepared;
}

/// Prepared-schema attributes bound to some channel.
inline std::set<std::string> readableAttributes(const VisSpec& spec) {
    std::set<std::string> out;
    for (const auto& [ch, b] : spec.encoding.bindings) out.insert(b.attr);
    return out;
}

/// P restricted to readable attributes, in prepared-schema order.
inline Table readableProjection(const Table& prepared, const std::set<std::string>& readable) {
    std::vector<std::string> cols;
    for (const auto& c : prepared.schema().columns())
        if (readable.count(c.name)) cols.push_back(c.name);
    return project(prepared, cols);
}

// ─── JSON forms ──────────────────────────────────────────────────────────

namespace detail {

[[noreturn]] inline void badDoc(const std::string& msg) { fail(ErrorKind::Parse, msg); }

inline const Json& field(const Json& obj, const char* key, std::string_view ctx) {
    if (!obj.is_object()) badDoc(std::string(ctx) + " must be an object");
    auto it = obj.find(key);
    if (it == obj.end()) badDoc(std::string(ctx) + ": missing field '" + key + "'");
    return *it;
}

inline std::string stringField(const Json& obj, const char* key, std::string_view ctx) {
    const auto& v = field(obj, key, ctx);
    if (!v.is_string()) badDoc(std::string(ctx) + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

inline std::vector<std::string> namesField(const Json& obj, const char* key, std::string_view ctx) {
    const auto& v = field(obj, key, ctx);
    if (!v.is_array()) badDoc(std::string(ctx) + ": field '" + key + "' must be an array of names");
    std::vector<std::string> out;
    for (const auto& x : v) {
        if (!x.is_string()) badDoc(std::string(ctx) + ": field '" + key + "' must be an array of names");
        out.push_back(x.get<std::string>());
    }
    return out;
}

inline Expr exprField(const Json& obj, const char* key, std::string_view ctx) {
    return parseExpr(stringField(obj, key, ctx));
}

inline Value valueFromJson(const Json& j) {
    if (j.is_null()) return Value{};
    if (j.is_boolean()) return Value{j.get<bool>()};
    if (j.is_number()) return number(j.get<double>());
    if (j.is_string()) return Value{j.get<std::string>()};
    badDoc("unsupported JSON value " + j.dump());
}

inline OrderedJson valueToJson(const Value& v) {
    if (isNull(v)) return nullptr;
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    return std::get<bool>(v);
}

inline std::string lineColumn(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace detail

/// Parses JSON text, reporting syntax errors with line/column.
inline Json parseJsonText(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        std::size_t byte = e.byte > 0 ? e.byte - 1 : 0;
        fail(ErrorKind::Parse, "syntax error at " + detail::lineColumn(text, byte) + ": " + e.what());
    }
}

inline Schema schemaFromJson(const Json& j) {
    if (!j.is_array()) detail::badDoc("input schema must be an array of {name, type}");
    std::vector<Column> cols;
    for (const auto& c : j) {
        auto name = detail::stringField(c, "name", "input column");
        auto typeText = detail::stringField(c, "type", "input column");
        auto type = parseTypeName(typeText);
        if (!type) detail::badDoc("unknown column type " + typeText);
        cols.push_back({name, *type});
    }
    return Schema(std::move(cols));
}

inline OrderedJson schemaToJson(const Schema& s) {
    OrderedJson out = OrderedJson::array();
    for (const auto& c : s.columns()) {
        OrderedJson col;
        col["name"] = c.name;
        col["type"] = std::string(typeName(c.type));
        out.push_back(col);
    }
    return out;
}

inline TransformOp opFromJson(const Json& j) {
    using namespace detail;
    auto tag = stringField(j, "op", "pipeline op");
    if (tag == "filter") return FilterOp{exprField(j, "predicate", tag)};
    if (tag == "derive") return DeriveOp{stringField(j, "as", tag), exprField(j, "expr", tag)};
    if (tag == "project") return ProjectOp{namesField(j, "columns", tag)};
    if (tag == "groupAggregate") {
        GroupAggregateOp op{namesField(j, "keys", tag), {}};
        const auto& aggs = field(j, "aggs", tag);
        if (!aggs.is_array()) badDoc("groupAggregate: 'aggs' must be an array");
        for (const auto& a : aggs) {
            auto fnText = stringField(a, "fn", "aggregate");
            auto fn = parseAggName(fnText);
            if (!fn) badDoc("unknown aggregate function " + fnText);
            std::string input = a.contains("input") ? stringField(a, "input", "aggregate") : "";
            if (*fn != AggFn::Count && input.empty()) badDoc("aggregate " + fnText + " needs an 'input'");
            op.aggs.push_back({*fn, input, stringField(a, "as", "aggregate")});
        }
        return op;
    }
    if (tag == "normalize") return NormalizeOp{stringField(j, "input", tag), stringField(j, "as", tag)};
    if (tag == "stack")
        return StackOp{stringField(j, "input", tag), namesField(j, "orderBy", tag), stringField(j, "lower", tag),
                       stringField(j, "upper", tag)};
    if (tag == "bin") {
        const auto& w = field(j, "width", tag);
        if (!w.is_number()) badDoc("bin: 'width' must be a number");
        return BinningOp{stringField(j, "input", tag), w.get<double>(), stringField(j, "as", tag)};
    }
    if (tag == "sort") {
        SortOp op;
        const auto& keys = field(j, "keys", tag);
        if (!keys.is_array()) badDoc("sort: 'keys' must be an array");
        for (const auto& k : keys) {
            std::string order = k.contains("order") ? stringField(k, "order", "sort key") : "asc";
            if (order != "asc" && order != "desc") badDoc("sort order must be asc or desc");
            op.keys.push_back({stringField(k, "column", "sort key"), order == "desc"});
        }
        return op;
    }
    if (tag == "limit") {
        const auto& n = field(j, "n", tag);
        if (!n.is_number_unsigned()) badDoc("limit: 'n' must be a non-negative integer");
        return LimitOp{n.get<std::size_t>()};
    }
    badDoc("unknown op '" + tag + "'");
}

inline OrderedJson opToJson(const TransformOp& op) {
    return std::visit(
        overloaded{
            [](const FilterOp& o) {
                return OrderedJson{{"op", "filter"}, {"predicate", o.predicate.toString()}};
            },
            [](const DeriveOp& o) {
                return OrderedJson{{"op", "derive"}, {"as", o.output}, {"expr", o.expr.toString()}};
            },
            [](const ProjectOp& o) { return OrderedJson{{"op", "project"}, {"columns", o.columns}}; },
            [](const GroupAggregateOp& o) {
                OrderedJson aggs = OrderedJson::array();
                for (const auto& a : o.aggs) {
                    OrderedJson x;
                    x["fn"] = std::string(aggName(a.fn));
                    if (!a.input.empty()) x["input"] = a.input;
                    x["as"] = a.output;
                    aggs.push_back(x);
                }
                return OrderedJson{{"op", "groupAggregate"}, {"keys", o.keys}, {"aggs", aggs}};
            },
            [](const NormalizeOp& o) { return OrderedJson{{"op", "normalize"}, {"input", o.input}, {"as", o.output}}; },
            [](const StackOp& o) {
                return OrderedJson{{"op", "stack"}, {"input", o.input}, {"orderBy", o.orderBy},
                                   {"lower", o.lower},  {"upper", o.upper}};
            },
            [](const BinningOp& o) {
                return OrderedJson{{"op", "bin"}, {"input", o.input}, {"width", o.width}, {"as", o.output}};
            },
            [](const SortOp& o) {
                OrderedJson keys = OrderedJson::array();
                for (const auto& k : o.keys)
                    keys.push_back(OrderedJson{{"column", k.column}, {"order", k.descending ? "desc" : "asc"}});
                return OrderedJson{{"op", "sort"}, {"keys", keys}};
            },
            [](const LimitOp& o) { return OrderedJson{{"op", "limit"}, {"n", o.n}}; },
        },
        op);
}

inline Pipeline pipelineFromJson(const Json& j) {
    if (!j.is_array()) detail::badDoc("'pipeline' must be an array of op objects");
    Pipeline p;
    for (const auto& op : j) p.ops.push_back(opFromJson(op));
    return p;
}

inline OrderedJson pipelineToJson(const Pipeline& p) {
    OrderedJson out = OrderedJson::array();
    for (const auto& op : p.ops) out.push_back(opToJson(op));
    return out;
}

inline LinearScale scaleFromJson(const Json& j) {
    using namespace detail;
    const auto& dom = field(j, "domain", "scale");
    const auto& range = field(j, "range", "scale");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number())
        badDoc("scale: 'range' must be [lo, hi]");
    if (!dom.is_array()) badDoc("scale: 'domain' must be an array");
    std::string type = j.contains("type") ? stringField(j, "type", "scale") : "";
    bool allNumbers = std::all_of(dom.begin(), dom.end(), [](const Json& x) { return x.is_number(); });
    if (type.empty()) type = (allNumbers && dom.size() == 2) ? "linear" : "categorical";
    double rlo = range[0].get<double>();
    double rhi = range[1].get<double>();
    if (type == "linear") {
        if (!allNumbers || dom.size() != 2) badDoc("linear scale domain must be [lo, hi]");
        return LinearScale::numeric(dom[0].get<double>(), dom[1].get<double>(), rlo, rhi);
    }
    if (type != "categorical") badDoc("unknown scale type " + type);
    std::vector<Value> values;
    for (const auto& x : dom) values.push_back(valueFromJson(x));
    return LinearScale::categorical(std::move(values), rlo, rhi);
}

inline OrderedJson scaleToJson(const LinearScale& s) {
    OrderedJson out;
    if (s.isNumeric()) {
        out["domain"] = {s.interval().lo, s.interval().hi};
    } else {
        out["type"] = "categorical";
        OrderedJson dom = OrderedJson::array();
        for (const auto& v : s.categories()) dom.push_back(detail::valueToJson(v));
        out["domain"] = dom;
    }
    out["range"] = {s.rangeLo(), s.rangeHi()};
    return out;
}

inline Encoding encodingFromJson(const Json& j) {
    using namespace detail;
    auto markText = stringField(j, "mark", "encoding");
    auto mark = parseMark(markText);
    if (!mark) badDoc("unknown mark '" + markText + "'");
    Encoding e{*mark, {}};
    if (j.contains("bindings")) {
        const auto& b = j.at("bindings");
        if (!b.is_object()) badDoc("encoding: 'bindings' must be an object");
        for (const auto& [chText, binding] : b.items()) {
            auto ch = parseChannel(chText);
            if (!ch) badDoc("unknown channel '" + chText + "'");
            e.bindings.emplace(*ch, Binding{stringField(binding, "attr", chText), scaleFromJson(field(binding, "scale", chText))});
        }
    }
    return e;
}

inline OrderedJson encodingToJson(const Encoding& e) {
    OrderedJson bindings = OrderedJson::object();
    for (const auto& [ch, b] : e.bindings)
        bindings[std::string(channelName(ch))] = OrderedJson{{"attr", b.attr}, {"scale", scaleToJson(b.scale)}};
    return OrderedJson{{"mark", std::string(markName(e.mark))}, {"bindings", bindings}};
}

/// Parses and schema-checks a spec document.
inline VisSpec parseSpec(std::string_view text) {
    Json j = parseJsonText(text);
    if (!j.is_object()) detail::badDoc("spec document must be a JSON object");
    VisSpec s;
    s.name = detail::stringField(j, "name", "spec");
    s.input = schemaFromJson(detail::field(j, "input", "spec"));
    s.pipeline = pipelineFromJson(detail::field(j, "pipeline", "spec"));
    s.encoding = encodingFromJson(detail::field(j, "encoding", "spec"));
    checkSpec(s);
    return s;
}

inline OrderedJson specToJson(const VisSpec& s) {
    OrderedJson out;
    out["name"] = s.name;
    out["input"] = schemaToJson(s.input);
    out["pipeline"] = pipelineToJson(s.pipeline);
    out["encoding"] = encodingToJson(s.encoding);
    return out;
}

} // namespace vizproxy
