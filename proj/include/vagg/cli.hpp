// SPDX-License-Identifier: Apache-2.0
//
// `vagg` command line: gen-data, train, eval, grad-check, score.
#pragma once

#include <iosfwd>

namespace vagg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;  // numeric or validation failure

/// Parses and runs one subcommand. Normal output goes to `out`, diagnostics
/// to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace vagg
