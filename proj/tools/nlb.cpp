#include <iostream>
#include <string>
#include <vector>

#include "nlb/pipeline.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return nlb::cli::run(args, std::cout, std::cerr);
}
