#pragma once

#include <ostream>

namespace malfuse::app {

// Parses and runs one command line. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const char* env_out);

}  // namespace malfuse::app
