#include <string>
#include <vector>

#include "kft/cli/commands.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return kft::cli::run_command(args);
}
