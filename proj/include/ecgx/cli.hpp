#pragma once

#include <ostream>

#include "ecgx/error.hpp"

namespace ecgx {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

int exit_code_for(ErrorKind kind);

// Subcommands: synth, train, group-train, eval, bench, compare, dump-filter.
// Failures print one line "error kind=<Kind> message=<text>" to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ecgx
