#include "xrsel/error.hpp"

namespace xrsel {

const char* to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::EmptyRegion: return "empty-region";
    }
    return "unknown";
}

}  // namespace xrsel
