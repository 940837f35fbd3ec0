#include <iostream>

#include "paramnet/experiments.hpp"

int main(int argc, char** argv) {
  return paramnet::cli_main(argc, argv, std::cout, std::cerr);
}
