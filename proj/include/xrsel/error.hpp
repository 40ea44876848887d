#pragma once

#include <stdexcept>
#include <string>

namespace xrsel {

enum class ErrorKind {
    Validation,   // malformed value types (axes, ranges)
    Geometry,     // impossible spatial configuration
    Parameter,    // bad numeric parameter
    Degenerate,   // singular / zero-measure input
    Parse,        // file or document syntax
    Io,
    Numeric,      // non-finite or collapsed estimation
    EmptyRegion,  // no region of interest
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

}  // namespace xrsel
