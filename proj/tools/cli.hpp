#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cnlm {

enum ExitCode { kSuccess = 0, kUsage = 1, kDataError = 2, kNumericFailure = 3 };

// Runs one subcommand. `args` excludes the program name; results that have
// no output path go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cnlm
