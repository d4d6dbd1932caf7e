#pragma once

// Batch command line: build-index, filter, build-panel, estimate, effects,
// simulate. Every run writes a manifest that can be fed back through
// --config to repeat it.

#include <iosfwd>

namespace pdgrav::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitConvergence = 4;

// argv[0] is the program name and argv[1] the subcommand. Help text goes to
// `out`; JSON-lines logs and error messages go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdgrav::cli
