// Prints the Gram structure report the solver's closed-form updates rely
// on, for a handful of small dimension combinations.

#include <iostream>

#include "sketchdecomp/constraint_ops.hpp"

using namespace sketchdecomp;

int main() {
  for (const Dims& dims :
       {Dims{4, 2, 3, 4}, Dims{5, 3, 4, 8}, Dims{3, 2, 2, 2}, Dims{10, 3, 4, 16}}) {
    const GramReport report = gram_diagnostics(dims);
    std::cout << "n=" << dims.n << " m=" << dims.m << " d=" << dims.d
              << " lambda=" << dims.lambda()
              << "  B1B1^T dev=" << report.b1_deviation
              << "  B2B2^T dev=" << report.b2_deviation
              << "  B3B3^T dev=" << report.b3_deviation
              << (report.ok() ? "  [ok]" : "  [MISMATCH]") << "\n";
  }
  return 0;
}
