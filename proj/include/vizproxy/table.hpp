#pragma once

#include "vizproxy/value.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace vizproxy {

/// Immutable typed relation. Rows are validated against the schema on construction.
class Table {
public:
    Table() = default;

    Table(Schema schema, std::vector<Row> rows) : schema_(std::move(schema)), rows_(std::move(rows)) {
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            const auto& row = rows_[r];
            if (row.size() != schema_.size())
                fail(ErrorKind::Schema, "row " + std::to_string(r) + " has arity " + std::to_string(row.size()) +
                                            ", schema has " + std::to_string(schema_.size()));
            for (std::size_t c = 0; c < row.size(); ++c) {
                if (!matchesType(row[c], schema_[c].type))
                    fail(ErrorKind::Type, "cell (row " + std::to_string(r) + ", col " + schema_[c].name +
                                              ") is not " + std::string(typeName(schema_[c].type)));
                if (auto* d = std::get_if<double>(&row[c]); d && !std::isfinite(*d))
                    fail(ErrorKind::Type, "non-finite number at (row " + std::to_string(r) + ", col " +
                                              schema_[c].name + ")");
            }
        }
    }

    const Schema& schema() const { return schema_; }
    const std::vector<Row>& rows() const { return rows_; }
    std::size_t rowCount() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    const Value& at(std::size_t row, std::string_view column) const {
        return rows_.at(row).at(schema_.require(column));
    }

    std::vector<Value> column(std::string_view name) const {
        auto idx = schema_.require(name);
        std::vector<Value> out;
        out.reserve(rows_.size());
        for (const auto& r : rows_) out.push_back(r[idx]);
        return out;
    }

private:
    Schema schema_;
    std::vector<Row> rows_;
};

/// Projection keeping multiplicity, columns in the order given.
inline Table project(const Table& t, std::span<const std::string> columns) {
    std::vector<Column> cols;
    std::vector<std::size_t> idx;
    for (const auto& name : columns) {
        auto i = t.schema().require(name);
        idx.push_back(i);
        cols.push_back(t.schema()[i]);
    }
    std::vector<Row> rows;
    rows.reserve(t.rowCount());
    for (const auto& r : t.rows()) {
        Row out;
        out.reserve(idx.size());
        for (auto i : idx) out.push_back(r[i]);
        rows.push_back(std::move(out));
    }
    return Table(Schema(std::move(cols)), std::move(rows));
}

/// Rows sorted lexicographically over all columns in schema order.
inline Table canonicalize(const Table& t) {
    auto rows = t.rows();
    std::stable_sort(rows.begin(), rows.end());
    return Table(t.schema(), std::move(rows));
}

/// Relative tolerance, falling back to absolute when both magnitudes are below one.
inline bool numbersClose(double a, double b, double eps) {
    if (a == b) return true;
    double scale = std::max(std::fabs(a), std::fabs(b));
    double diff = std::fabs(a - b);
    return scale < 1.0 ? diff <= eps : diff <= eps * scale;
}

inline bool valuesClose(const Value& a, const Value& b, double eps) {
    if (isNumber(a) && isNumber(b)) return numbersClose(std::get<double>(a), std::get<double>(b), eps);
    return a == b;
}

inline bool tablesEqual(const Table& t1, const Table& t2, double eps) {
    if (!(t1.schema() == t2.schema())) return false;
    if (t1.rowCount() != t2.rowCount()) return false;
    auto c1 = canonicalize(t1);
    auto c2 = canonicalize(t2);
    for (std::size_t r = 0; r < c1.rowCount(); ++r)
        for (std::size_t c = 0; c < c1.schema().size(); ++c)
            if (!valuesClose(c1.rows()[r][c], c2.rows()[r][c], eps)) return false;
    return true;
}

inline std::string describe(const Table& t) {
    std::string out = t.schema().describe() + " {";
    for (std::size_t r = 0; r < t.rowCount(); ++r) {
        out += r ? ", (" : "(";
        for (std::size_t c = 0; c < t.schema().size(); ++c) {
            if (c) out += ",";
            out += toLiteral(t.rows()[r][c]);
        }
        out += ")";
    }
    return out + "}";
}

} // namespace vizproxy
