#pragma once

// Command-line front end: `run`, `sweep` and `selftest`.
//
// Exit codes: 0 success, 1 failed criteria or failed sweep seeds, 2 invalid
// configuration or arguments, 3 output or input file errors.

#include <ostream>

namespace sigmatrack {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sigmatrack
