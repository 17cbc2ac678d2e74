#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ec2t::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses `args` (program name excluded), runs the selected subcommand and
/// returns the process exit code. Results go to `out`, diagnostics to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ec2t::cli
