#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace orbitshade {

// Exit codes of the command-line tool. Negative scientific outcomes (no loop,
// no shadow) are successful runs.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Runs the orbitshade command line on args (program name excluded).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace orbitshade
