#pragma once

#include <string>
#include <vector>

namespace labeldist {

// Full command-line surface (verbs: sweep, gen-data, train, eval, compare).
// `args` excludes the program name.  Returns the process exit code:
// 0 success, 2 validation/usage error, 3 numeric divergence.
int run_cli(const std::vector<std::string>& args);

}  // namespace labeldist
