#pragma once

#include <stdexcept>
#include <string>

namespace mo3tr {

enum class ErrorKind {
    Dimension,   // shape / size mismatch
    Usage,       // API misuse (e.g. backward on a non-scalar)
    Ordering,    // non-monotonic frame append
    Lookup,      // unknown or closed identity
    Geometry,    // degenerate boxes
    Parse,       // malformed input file
    Config,      // schema violation, dimension mismatch vs checkpoint
    Data,        // inconsistent ground truth / scenario
    Io,          // missing or unwritable file
    Numeric,     // non-finite value produced
    Eval,        // inconsistent evaluation inputs
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

const char* error_kind_name(ErrorKind kind);

} // namespace mo3tr
