#include <iostream>

#include "sigmatrack/cli.hpp"

int main(int argc, char** argv) {
  return sigmatrack::run_cli(argc, argv, std::cout, std::cerr);
}
