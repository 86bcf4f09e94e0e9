#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vizproxy {

enum class ErrorKind {
    Ingest,        // malformed CSV
    Type,          // cell does not match declared type
    Schema,        // unknown / duplicate column, invalid op against schema
    Eval,          // runtime evaluation failure (division by zero, zero total)
    Parse,         // syntax error in a spec, task or expression
    Range,         // value outside a scale domain
    NotInvertible, // degenerate scale
    Extraction,    // value-at matched zero or several rows
    Template,      // missing / out-of-domain template binding
    Profile,       // malformed cost profile or unpriced op
    Unknown,       // rewrite search gave up (distinct from Impossible)
    Harness        // plan / spec mismatch inside the oracle
};

inline std::string_view errorKindName(ErrorKind k) {
    switch (k) {
    case ErrorKind::Ingest: return "ingest";
    case ErrorKind::Type: return "type";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Eval: return "eval";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Range: return "range";
    case ErrorKind::NotInvertible: return "not-invertible";
    case ErrorKind::Extraction: return "extraction";
    case ErrorKind::Template: return "template";
    case ErrorKind::Profile: return "profile";
    case ErrorKind::Unknown: return "unknown";
    case ErrorKind::Harness: return "harness";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

} // namespace vizproxy
