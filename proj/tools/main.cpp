#include <iostream>

#include "blowfish/cli.hpp"

int main(int argc, char** argv) {
  return blowfish::dispatch(argc, argv, std::cout, std::cerr);
}
