#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace mcpose {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNumericalFailure = 2;

// Entry point without the program name: args = {"simulate", "--runs", "1", ...}.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mcpose
