#include <iostream>
#include <string>
#include <vector>

#include "ttmmk/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return ttmmk::run_cli(args, std::cout, std::cerr);
}
