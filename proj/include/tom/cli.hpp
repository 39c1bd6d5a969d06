#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tom {

// Entry point shared by the tomctl binary and the CLI tests; `args`
// excludes the program name.
// Subcommands: solve, experiment, infer, simulate, serve.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace tom
