#include <iostream>
#include <string>
#include <vector>

#include "bias_lens/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bias_lens::run_cli(args, std::cout, std::cerr);
}
