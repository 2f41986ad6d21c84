#include <iostream>
#include <string>
#include <vector>

#include "rnf/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return rnf::run_cli(args, std::cout, std::cerr);
}
