#pragma once

#include <stdexcept>
#include <string>

namespace lertlab {

// Error category, used by tests and callers to tell failure modes apart
// without string matching.
enum class ErrorKind {
    Parse,       // malformed input text (bad column count, bad number, ...)
    Schema,      // unknown tag / label outside its inventory
    Annotation,  // structurally invalid annotation (BIEOS violation, ...)
    Config,      // inconsistent or out-of-range configuration
    Input,       // runtime input violates a precondition (id >= V, ...)
    Numeric,     // non-finite value produced during compute
    Data,        // empty or unusable data set
    Io,          // file system failure
    Version,     // file format version mismatch
    Truncated,   // file shorter than its directory claims
    Shape,       // tensor shape mismatch
};

const char* error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::Schema: return "schema error";
        case ErrorKind::Annotation: return "annotation error";
        case ErrorKind::Config: return "config error";
        case ErrorKind::Input: return "input error";
        case ErrorKind::Numeric: return "numeric error";
        case ErrorKind::Data: return "data error";
        case ErrorKind::Io: return "io error";
        case ErrorKind::Version: return "version error";
        case ErrorKind::Truncated: return "truncated file";
        case ErrorKind::Shape: return "shape error";
    }
    return "error";
}

}  // namespace lertlab
