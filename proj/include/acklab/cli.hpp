#pragma once

// Command-line entry point. Exit codes: 0 success, 1 usage error, 2 data error.

#include <iosfwd>
#include <string>
#include <vector>

namespace acklab {

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace acklab
