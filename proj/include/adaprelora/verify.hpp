#pragma once

// Executable property suites over seeded random instances, reporting the
// maximum observed deviation per property against its tolerance. Driven by
// the `verify` CLI subcommand and reused by the acceptance tests.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "adaprelora/adafactor.hpp"
#include "adaprelora/generator.hpp"

namespace adaprelora {

enum class VerifyIntensity { quick, full };  // 20 vs 200 seeds per property

struct PropertyResult {
  std::string name;
  double max_deviation = 0.0;
  double tolerance = 0.0;
  std::uint64_t worst_seed = 0;
  int trials = 0;
  bool pass = false;
};

/// Runs every property suite. Results come back in a fixed order.
std::vector<PropertyResult> run_verification(VerifyIntensity intensity);

/// One formatted report line per result, e.g.
///   [PASS] solver.projection_identity  max_dev=1.2e-12  tol=1e-09  seed=17  trials=200
std::string format_property_result(const PropertyResult& result);

// Seeded instance generators shared with the tests. Factors are planted
// with singular values in [0.3, 1.5] (sigma_min >= 0.1 with margin); weight
// diagonals are log-uniform in [0.1, 10].
struct TestInstance {
  FactorPair fp;
  DiagWeights w;
  Eigen::MatrixXd G;
};

FactorPair random_full_rank_pair(std::uint64_t seed, Eigen::Index max_dim = 8,
                                 Eigen::Index max_rank = 3);
DiagWeights random_weights(std::uint64_t seed, Eigen::Index m, Eigen::Index n);
TestInstance random_test_instance(std::uint64_t seed, Eigen::Index max_dim = 8,
                                  Eigen::Index max_rank = 3);

}  // namespace adaprelora
