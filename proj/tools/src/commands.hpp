#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sclq::cli {

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kUnreachable = 2,
    kInvalidConfig = 3,
    kNumericalFailure = 4,
};

/// Runs one CLI invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sclq::cli
