#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace csvq {

/// Entry point of the `csvq` command-line tool. Returns the process exit
/// code: 0 success, 1 configuration error, 2 numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace csvq
