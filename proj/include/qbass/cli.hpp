#pragma once

#include <ostream>

namespace qbass::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one qbass command. Returns 0 on success, 1 on a violated
/// mathematical precondition, 2 on usage, I/O or schema errors. Results go
/// to `out` (or --out), diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qbass::cli
