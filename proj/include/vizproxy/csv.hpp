#pragma once

#include "vizproxy/table.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vizproxy {

namespace detail {

// RFC 4180 record splitter. Quoted fields may contain separators, quotes ("") and newlines.
inline std::vector<std::vector<std::string>> splitCsv(std::string_view src) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool inQuotes = false;
    bool fieldStarted = false;
    std::size_t i = 0;

    auto endField = [&] {
        record.push_back(std::move(field));
        field.clear();
        fieldStarted = false;
    };
    auto endRecord = [&] {
        endField();
        records.push_back(std::move(record));
        record.clear();
    };

    if (src.size() >= 3 && src.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
    for (; i < src.size(); ++i) {
        char c = src[i];
        if (inQuotes) {
            if (c == '"') {
                if (i + 1 < src.size() && src[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    inQuotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"' && !fieldStarted) {
            inQuotes = true;
            fieldStarted = true;
        } else if (c == ',') {
            endField();
        } else if (c == '\r') {
            if (i + 1 < src.size() && src[i + 1] == '\n') ++i;
            endRecord();
        } else if (c == '\n') {
            endRecord();
        } else {
            field += c;
            fieldStarted = true;
        }
    }
    if (inQuotes) fail(ErrorKind::Ingest, "unterminated quoted field at end of input");
    if (fieldStarted || !field.empty() || !record.empty()) endRecord();
    return records;
}

inline Value parseCell(const std::string& cell, ValueType type, std::size_t row, const std::string& col) {
    if (cell.empty()) return Value{};
    switch (type) {
    case ValueType::Number:
        if (auto d = parseNumber(cell)) return Value{*d};
        break;
    case ValueType::Boolean:
        if (cell == "true") return Value{true};
        if (cell == "false") return Value{false};
        break;
    case ValueType::Text:
        return Value{cell};
    }
    fail(ErrorKind::Type, "type error at (row " + std::to_string(row) + ", col " + col + "): '" + cell +
                              "' is not " + std::string(typeName(type)));
}

} // namespace detail

/// Loads CSV with a header row. Empty cells are null. Without a schema a column is
/// number iff every non-empty cell parses as a finite number, text otherwise.
/// Row indices in errors count data rows from 1 (the header is row 0).
inline Table loadCsv(std::string_view source, const std::optional<Schema>& schema = std::nullopt) {
    auto records = detail::splitCsv(source);
    if (records.empty()) fail(ErrorKind::Ingest, "missing header row");
    const auto& header = records.front();
    for (std::size_t r = 1; r < records.size(); ++r)
        if (records[r].size() != header.size())
            fail(ErrorKind::Ingest, "ragged row at index " + std::to_string(r) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " +
                                        std::to_string(records[r].size()));

    Schema resolved;
    if (schema) {
        if (schema->size() != header.size())
            fail(ErrorKind::Schema, "header has " + std::to_string(header.size()) + " columns, schema has " +
                                        std::to_string(schema->size()));
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] != (*schema)[c].name)
                fail(ErrorKind::Schema, "header column " + header[c] + " does not match schema column " +
                                            (*schema)[c].name);
        resolved = *schema;
    } else {
        std::vector<Column> cols;
        for (std::size_t c = 0; c < header.size(); ++c) {
            bool numeric = true;
            for (std::size_t r = 1; r < records.size() && numeric; ++r) {
                const auto& cell = records[r][c];
                if (!cell.empty() && !parseNumber(cell)) numeric = false;
            }
            cols.push_back({header[c], numeric ? ValueType::Number : ValueType::Text});
        }
        resolved = Schema(std::move(cols));
    }

    std::vector<Row> rows;
    rows.reserve(records.size() - 1);
    for (std::size_t r = 1; r < records.size(); ++r) {
        Row row;
        row.reserve(header.size());
        for (std::size_t c = 0; c < header.size(); ++c)
            row.push_back(detail::parseCell(records[r][c], resolved[c].type, r, resolved[c].name));
        rows.push_back(std::move(row));
    }
    return Table(std::move(resolved), std::move(rows));
}

/// Writes a table back as CSV (nulls as empty cells).
inline std::string toCsv(const Table& t) {
    auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    };
    std::string out;
    for (std::size_t c = 0; c < t.schema().size(); ++c) {
        if (c) out += ',';
        out += quote(t.schema()[c].name);
    }
    out += '\n';
    for (const auto& row : t.rows()) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out += ',';
            if (!isNull(row[c])) out += quote(toString(row[c]));
        }
        out += '\n';
    }
    return out;
}

} // namespace vizproxy
