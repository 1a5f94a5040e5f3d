#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ddtsr::cli {

/// Seed used by subcommands that shuffle or sample when none is given.
inline constexpr std::uint64_t kDefaultSeed = 17;

/// Execute one command-line invocation. `args` excludes the program name.
/// Data goes to `out` or to files under the subcommand's --out; diagnostics
/// and progress go to `err`. Returns the process exit code:
///   0 success
///   1 bad flags, bad config, or malformed input data
///   2 runtime failure (a session died, a metric was underivable)
///   3 remote endpoint unreachable, timed out, or off-protocol
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace ddtsr::cli
