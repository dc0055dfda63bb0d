#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridvlad::cli {

/// Runs the command line (args excludes the program name). Diagnostics go
/// to err; resolved configs and results to out. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gridvlad::cli
