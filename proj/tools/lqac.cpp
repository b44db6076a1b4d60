#include <iostream>
#include <string>
#include <vector>

#include "lqac/bench.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lqac::bench::cli_main(args, std::cout, std::cerr);
}
