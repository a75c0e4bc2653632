#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace adp {

/// Exit status: 0 success, 1 validation or usage error, 2 backend failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace adp
