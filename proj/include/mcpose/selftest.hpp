#pragma once

#include <string>
#include <vector>

namespace mcpose {

struct OracleResult {
  std::string name;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass() const { return residual < tolerance; }
};

// Noiseless checks of the core geometry, fusion, Jacobian and solver paths.
// Each residual is the worst case over a fixed set of random configurations.
std::vector<OracleResult> run_selftest();

}  // namespace mcpose
