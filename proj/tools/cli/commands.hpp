#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pgee::cli {

inline constexpr int kJsonSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kInputError = 1, kNotConverged = 2 };

// Parses the command line and runs one subcommand. Reports go to `out`,
// progress and errors to `err`. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pgee::cli
