#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xrsel::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitNumeric = 3,
    kExitEmptyRegion = 4,
    kExitEnvironment = 5,
};

/// Runs one command line (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args);

}  // namespace xrsel::cli
