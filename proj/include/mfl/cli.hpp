#pragma once

namespace mfl {

// Full command-line driver.  Returns the process exit code:
//   0 success; 2 configuration/usage problems; 3 numeric failure.
int cli_main(int argc, const char* const* argv);

}  // namespace mfl
