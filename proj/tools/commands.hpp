#pragma once

#include <ostream>

#include "config.hpp"

namespace repralign::cli {

// Runs one fully populated configuration. Throws repralign::Error.
void execute(const RunConfig& cfg, std::ostream& out);

// Entry point shared by the executable and the tests. Returns the process
// exit code: 0 success, 2 usage or validation error, 3 runtime error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace repralign::cli
