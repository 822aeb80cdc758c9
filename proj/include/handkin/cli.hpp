#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace handkin {

// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitParse = 2;  // malformed input, bad flags, invalid values
inline constexpr int kExitShape = 3;  // shape or model/data mismatch
inline constexpr int kExitNumerical = 4;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace handkin
