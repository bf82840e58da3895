#include <iostream>
#include <string>
#include <vector>

#include "cremid/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cremid::run_cli(args, std::cout, std::cerr);
}
