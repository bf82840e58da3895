#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cremid {

/// Runs the `cremid` command line. `args` excludes the program name.
/// Returns 0 on success, 1 on invalid input and 2 on a numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cremid
