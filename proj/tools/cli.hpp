#pragma once

#include <ostream>

namespace nnrep::cli {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
// repair/loop: infeasible repair; verify: violated.
inline constexpr int kExitNegative = 2;
// Limit reached without a usable answer.
inline constexpr int kExitLimit = 3;

// Parses argv and runs one subcommand. Diagnostics go to `err`, verdict lines
// and progress to `out`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nnrep::cli
