#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace steer::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kInputError = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kRuntimeError = 3;
inline constexpr int kAllConfigsFailed = 4;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace steer::cli
