#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hsd {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumeric = 4 };

/// Entry point of the `hsdrive` tool; `args` excludes the program name.
/// Never throws: every failure is reported on `err` and mapped to an exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, const char* const* argv);

}  // namespace hsd
