#pragma once

#include <string>
#include <vector>

namespace coverify {

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

int run_cli(int argc, char** argv);
/// Same as above; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace coverify
