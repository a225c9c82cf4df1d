#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ndem::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kInputError = 2,
  kEndpointError = 3,
};

/// Runs one command line (without the program name). Everything the
/// command prints goes to `out` / `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ndem::cli
