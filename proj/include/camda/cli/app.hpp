#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace camda::cli {

/// Runs one `camda` invocation. `args` excludes the program name. Returns
/// the process exit code; human-readable output goes to `out`, diagnostics
/// to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace camda::cli
