#include <iostream>
#include <string>
#include <vector>

#include "saddlelab/app.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return saddlelab::dispatch(args, std::cout, std::cerr);
}
