#pragma once

#include <string>
#include <vector>

namespace symdyn::cli {

// Entry point behind the symdyn binary; exposed so tests can drive commands
// in process. Exit codes: 0 success, 1 runtime failure, 2 config/usage error.
int run_cli(std::vector<std::string> args);

}  // namespace symdyn::cli
