#pragma once

// Command-line front end. Subcommands exchange data only through
// directories and CSV files.

#include <iosfwd>

namespace diagfuse::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// argv[0] is the program name. Messages go to `out` and `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace diagfuse::cli
