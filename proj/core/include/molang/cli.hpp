#pragma once

#include <string>
#include <vector>

namespace molang {

// Command-line surface shared by the binary and the tests. `args` excludes
// the program name. Returns the process exit code: 0 success, 1 usage error
// (unknown flag or subcommand, bad flag value), 2 data/config/format error.
// All randomness is controlled by --seed; no environment variables are read.
int run_cli(const std::vector<std::string>& args);

}  // namespace molang
