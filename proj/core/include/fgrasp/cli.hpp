#pragma once

#include <string>
#include <vector>

namespace fgrasp::cli {

// Runs the command-line driver on `args` (the argv tail, without the program
// name) and returns the process exit code:
//   0  success
//   1  invalid input (bad flags, bad config keys, precondition violations)
//   2  I/O failure (unreadable or unwritable files, malformed binary payloads)
int run(const std::vector<std::string>& args);

}  // namespace fgrasp::cli
