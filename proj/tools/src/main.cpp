#include <iostream>
#include <string>
#include <vector>

#include "qus/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return qus::cli::run(args, std::cout, std::cerr);
}
