#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skpd::cli {

/// Runs the `skpd` command line. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skpd::cli
