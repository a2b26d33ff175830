#pragma once

#include <ostream>

namespace ssal {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitExhausted = 2;

/// Entry point of the `ssal` command line. Returns the process exit code:
/// 0 on success, 1 on bad input, 2 when selection exhausted the pool.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ssal
