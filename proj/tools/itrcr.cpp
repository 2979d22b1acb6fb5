#include <string>
#include <vector>

#include "itrcr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return itrcr::cli::run_command(args);
}
