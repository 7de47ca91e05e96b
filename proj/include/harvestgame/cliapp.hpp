#pragma once

#include <string>
#include <vector>

namespace harvestgame::cli {

/// Runs the command-line tool on the given arguments (argv[0] excluded).
/// Returns the process exit status: 0 on success, 1 on a run that finished
/// but did not converge, 2 on bad input or I/O failure.
int run(const std::vector<std::string>& args);

}  // namespace harvestgame::cli
