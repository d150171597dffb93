#pragma once

#include <string>
#include <vector>

namespace suskit {

// Runs one toolkit subcommand. `args` is argv without the program name.
// Returns the process exit code: 0 on success, 1 on a runtime failure,
// 2 on a usage error.
int dispatch(const std::vector<std::string>& args);

}  // namespace suskit
