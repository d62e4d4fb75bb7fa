#include <iostream>

#include "radtriage/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return radtriage::run_cli(args, std::cout, std::cerr);
}
