#pragma once

#include <ostream>

namespace lazylp::cli {

inline constexpr int kOk = 0;
inline constexpr int kValidationError = 1;
inline constexpr int kRuntimeError = 2;

// Entry point behind the `lazylp` binary; kept in a library so tests can drive it.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lazylp::cli
