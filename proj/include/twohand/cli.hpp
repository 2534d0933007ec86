#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace twohand {

/// Command-line entry point. Returns 0 on success, 2 on usage errors and 1 on
/// any other failure. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli(int argc, char** argv);

}  // namespace twohand
