#pragma once

#include <iosfwd>

namespace phmm {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInput = 3;
inline constexpr int kExitTraining = 4;

// Entry point of the `phmm` tool. Results go to `out`, diagnostics and logs
// to `err`. Log verbosity follows the SPDLOG_LEVEL environment variable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace phmm
