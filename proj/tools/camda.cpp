#include <iostream>

#include "camda/ad/tensor.hpp"
#include "camda/cli/app.hpp"

int main(int argc, char** argv) {
  camda::ad::tune_allocator();
  return camda::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
