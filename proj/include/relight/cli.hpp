#pragma once

#include <iosfwd>

namespace relight {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitAsset = 2;
inline constexpr int kExitNumeric = 3;

// Entry point of the `relight` tool; writes stats JSON to `out` and
// diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relight
