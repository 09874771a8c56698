#pragma once

#include <exception>
#include <ostream>

namespace cogstat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitConvergence = 3;
inline constexpr int kExitTransport = 4;

/// Exit code for an exception escaping a subcommand.
int exit_code_for(const std::exception& e) noexcept;

/// Entry point of the `cogstat` tool. Never throws; errors are reported on
/// `err` and mapped to an exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cogstat::cli
