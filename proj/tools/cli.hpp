#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace neuracodec::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

// Runs one neuracodec invocation; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace neuracodec::cli
