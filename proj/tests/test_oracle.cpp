#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "adaprelora/errors.hpp"
#include "adaprelora/oracle.hpp"
#include "adaprelora/random_matrices.hpp"
#include "adaprelora/rng.hpp"
#include "adaprelora/verify.hpp"

using namespace adaprelora;

TEST_CASE("brute force reproduces the closed-form hand example") {
  Eigen::MatrixXd B(2, 1), A(1, 2), G(2, 2);
  B << 1, 0;
  A << 1, 0;
  G << 1, 2, 3, 4;
  const FactorPair fp(B, A);
  const BruteForceUpdate bf = brute_force_update(fp, DiagWeights::identity(2, 2), G);

  CHECK(bf.balanced.dB(0, 0) == doctest::Approx(0.5));
  CHECK(bf.balanced.dB(1, 0) == doctest::Approx(3.0));
  CHECK(bf.balanced.dA(0, 0) == doctest::Approx(0.5));
  CHECK(bf.balanced.dA(0, 1) == doctest::Approx(2.0));

  const BruteForceUpdate zero =
      brute_force_update(fp, DiagWeights::identity(2, 2), Eigen::MatrixXd::Zero(2, 2));
  CHECK(zero.balanced.dB.isZero(1e-14));
  CHECK(zero.balanced.dA.isZero(1e-14));
}

TEST_CASE("balanced and minimum-norm elements differ by a kernel direction") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const TestInstance inst = random_test_instance(seed);
    const BruteForceUpdate bf = brute_force_update(inst.fp, inst.w, inst.G);
    // Same induced W-direction...
    CHECK((bf.balanced.induced_w - bf.min_norm.induced_w).norm() <=
          1e-10 * (1.0 + bf.min_norm.induced_w.norm()));
    // ...and the minimum-norm element really is smaller or equal in norm.
    const double bal =
        std::sqrt(bf.balanced.dB.squaredNorm() + bf.balanced.dA.squaredNorm());
    const double mn =
        std::sqrt(bf.min_norm.dB.squaredNorm() + bf.min_norm.dA.squaredNorm());
    CHECK(mn <= bal + 1e-12);
  }
}

TEST_CASE("oracle rejects non-desk-scale instances") {
  Xoshiro256pp rng(5);
  const FactorPair fp(Eigen::MatrixXd::Ones(100, 3), Eigen::MatrixXd::Ones(3, 100));
  CHECK_THROWS_AS(
      brute_force_update(fp, DiagWeights::identity(100, 100), Eigen::MatrixXd::Zero(100, 100)),
      dimension_error);
}

TEST_CASE("finite differences recover a known gradient") {
  Xoshiro256pp rng(17);
  const Eigen::MatrixXd X = gaussian_matrix(rng, 3, 4);
  const auto half_norm = [](const Eigen::MatrixXd& M) { return 0.5 * M.squaredNorm(); };
  const Eigen::MatrixXd grad = finite_diff_gradient(half_norm, X);
  CHECK((grad - X).norm() <= 1e-6 * (1.0 + X.norm()));

  CHECK_THROWS_AS(finite_diff_gradient(half_norm, X, 1e-2), invalid_value_error);
  CHECK_THROWS_AS(finite_diff_gradient(half_norm, X, 1e-9), invalid_value_error);
  const auto bad = [](const Eigen::MatrixXd&) { return std::nan(""); };
  CHECK_THROWS_AS(finite_diff_gradient(bad, X), invalid_value_error);
}
