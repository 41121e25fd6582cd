#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace qus::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs `qus <subcommand> ...`. args[0] is the program name. Normal output
/// goes to `out`, diagnostics to `err`; the return value is the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qus::cli
