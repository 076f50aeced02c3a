#include <iostream>
#include <string>
#include <vector>

#include "sarfuse/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sarfuse::run_command(args, std::cout, std::cerr);
}
