#pragma once

#include <ostream>
#include <string>
#include <vector>

// In-process CLI entry point, so exit codes and output streams are directly
// testable. `args` excludes the program name.
//
// Exit codes: 0 success, 1 configuration/usage error, 2 infeasible security
// target, 3 numerical or simulation failure.

namespace qds {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qds
