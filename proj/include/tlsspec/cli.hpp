#pragma once

#include <iosfwd>

namespace tlsspec::cli {

enum ExitCode : int { kOk = 0, kInvalidInput = 2, kIoError = 3 };

// Entry point for the tlsspec command; returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace tlsspec::cli
