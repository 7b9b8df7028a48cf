#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace emtl {

/// Runs the command line tool. args[0] is the program name.
/// Returns 0 on success, 1 for invalid input and 2 for numerical failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace emtl
