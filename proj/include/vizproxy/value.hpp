#pragma once

#include "vizproxy/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vizproxy {

// Variant order defines the canonical cross-type order: null < number < text < boolean.
using Value = std::variant<std::monostate, double, std::string, bool>;

enum class ValueType { Number, Text, Boolean };

inline std::string_view typeName(ValueType t) {
    switch (t) {
    case ValueType::Number: return "number";
    case ValueType::Text: return "text";
    case ValueType::Boolean: return "boolean";
    }
    return "?";
}

inline std::optional<ValueType> parseTypeName(std::string_view s) {
    if (s == "number") return ValueType::Number;
    if (s == "text") return ValueType::Text;
    if (s == "boolean") return ValueType::Boolean;
    return std::nullopt;
}

inline bool isNull(const Value& v) { return std::holds_alternative<std::monostate>(v); }
inline bool isNumber(const Value& v) { return std::holds_alternative<double>(v); }
inline bool isText(const Value& v) { return std::holds_alternative<std::string>(v); }
inline bool isBool(const Value& v) { return std::holds_alternative<bool>(v); }

inline std::optional<ValueType> typeOf(const Value& v) {
    if (isNumber(v)) return ValueType::Number;
    if (isText(v)) return ValueType::Text;
    if (isBool(v)) return ValueType::Boolean;
    return std::nullopt;
}

inline bool matchesType(const Value& v, ValueType t) {
    return isNull(v) || typeOf(v) == t;
}

/// Builds a number value, rejecting NaN and infinities.
inline Value number(double d) {
    if (!std::isfinite(d)) fail(ErrorKind::Type, "non-finite number");
    return Value{d};
}

inline Value text(std::string s) { return Value{std::move(s)}; }

inline std::string formatNumber(double d) {
    if (d == 0.0) return "0";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, res.ptr);
}

inline std::string toString(const Value& v) {
    if (isNull(v)) return "null";
    if (auto* d = std::get_if<double>(&v)) return formatNumber(*d);
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    return std::get<bool>(v) ? "true" : "false";
}

/// Literal form: text is single-quoted so the output re-parses as an expression literal.
inline std::string toLiteral(const Value& v) {
    if (auto* s = std::get_if<std::string>(&v)) {
        std::string out = "'";
        for (char c : *s) {
            if (c == '\'') out += "''";
            else out += c;
        }
        return out + "'";
    }
    return toString(v);
}

/// Strict finite-number parse of a whole string.
inline std::optional<double> parseNumber(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double d = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(d)) return std::nullopt;
    return d;
}

struct Column {
    std::string name;
    ValueType type = ValueType::Number;

    bool operator==(const Column&) const = default;
};

class Schema {
public:
    Schema() = default;

    explicit Schema(std::vector<Column> columns) : columns_(std::move(columns)) {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (columns_[i].name.empty()) fail(ErrorKind::Schema, "empty column name");
            for (std::size_t j = 0; j < i; ++j)
                if (columns_[j].name == columns_[i].name)
                    fail(ErrorKind::Schema, "duplicate column " + columns_[i].name);
        }
    }

    const std::vector<Column>& columns() const { return columns_; }
    std::size_t size() const { return columns_.size(); }
    const Column& operator[](std::size_t i) const { return columns_[i]; }

    std::optional<std::size_t> indexOf(std::string_view name) const {
        for (std::size_t i = 0; i < columns_.size(); ++i)
            if (columns_[i].name == name) return i;
        return std::nullopt;
    }

    bool contains(std::string_view name) const { return indexOf(name).has_value(); }

    /// Index of `name`; `where` names the schema in the error message.
    std::size_t require(std::string_view name, std::string_view where = "schema") const {
        auto i = indexOf(name);
        if (!i) fail(ErrorKind::Schema, "unknown column " + std::string(name) + " in " + std::string(where));
        return *i;
    }

    Schema with(Column c) const {
        auto cols = columns_;
        cols.push_back(std::move(c));
        return Schema(std::move(cols));
    }

    std::string describe() const {
        std::string out = "(";
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (i) out += ", ";
            out += columns_[i].name + ":" + std::string(typeName(columns_[i].type));
        }
        return out + ")";
    }

    bool operator==(const Schema&) const = default;

private:
    std::vector<Column> columns_;
};

using Row = std::vector<Value>;

} // namespace vizproxy
