#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include "rfm/solve.hpp"

int main(int argc, char** argv) {
  rfm::select_blas_kernel(argv);
  return doctest::Context(argc, argv).run();
}
