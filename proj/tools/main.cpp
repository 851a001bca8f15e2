#include <string>
#include <vector>

#include "fgrasp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fgrasp::cli::run(args);
}
