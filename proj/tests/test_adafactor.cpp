#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "adaprelora/adafactor.hpp"
#include "adaprelora/errors.hpp"
#include "adaprelora/random_matrices.hpp"
#include "adaprelora/rng.hpp"

using namespace adaprelora;

TEST_CASE("statistics update: row/column sums of the squared gradient") {
  AdafactorState state = AdafactorState::fresh(2, 2, 0.0, 0.0);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(2, 2);
  state = update_stats(state, ones);
  CHECK(state.l(0) == 2.0);
  CHECK(state.l(1) == 2.0);
  CHECK(state.r(0) == 2.0);
  CHECK(state.r(1) == 2.0);
  CHECK(state.step_count == 1);

  // Full retention: decay 1 keeps the statistics frozen.
  AdafactorState frozen = AdafactorState::fresh(2, 2, 1.0, 1.0);
  frozen.l << 3.0, 4.0;
  frozen.r << 5.0, 6.0;
  const AdafactorState after = update_stats(frozen, ones * 7.0);
  CHECK(after.l(0) == 3.0);
  CHECK(after.r(1) == 6.0);
  CHECK(after.step_count == 1);

  // Zero gradient decays the statistics.
  AdafactorState decayed = AdafactorState::fresh(2, 2, 0.5, 0.25);
  decayed.l << 2.0, 2.0;
  decayed.r << 4.0, 4.0;
  const AdafactorState shrunk = update_stats(decayed, Eigen::MatrixXd::Zero(2, 2));
  CHECK(shrunk.l(0) == 1.0);
  CHECK(shrunk.r(0) == 1.0);
}

TEST_CASE("statistics update rejects bad input") {
  AdafactorState state = AdafactorState::fresh(2, 2);
  CHECK_THROWS_AS(update_stats(state, Eigen::MatrixXd::Zero(3, 2)), dimension_error);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(update_stats(state, bad), invalid_value_error);
}

TEST_CASE("weight construction: normalization and eps floor") {
  AdafactorState state = AdafactorState::fresh(2, 2);
  state.l << 2.0, 2.0;
  state.r << 2.0, 2.0;
  const DiagWeights w = build_weights(state);
  CHECK(w.l_half(0) == doctest::Approx(1.0));  // 2/sqrt(4) = 1
  CHECK(w.r_half(1) == doctest::Approx(1.0));

  AdafactorState floored = AdafactorState::fresh(2, 2);
  floored.l << 1.0, 0.0;
  floored.r << 1.0, 0.0;
  const DiagWeights wf = build_weights(floored);
  CHECK(wf.l_half(0) == doctest::Approx(1.0));
  CHECK(wf.l_half(1) == doctest::Approx(1e-3));  // sqrt(eps floor)

  const DiagWeights wz = build_weights(AdafactorState::fresh(3, 2));
  CHECK((wz.l_half.array() == std::sqrt(1e-6)).all());
  CHECK((wz.r_half.array() == std::sqrt(1e-6)).all());
}

TEST_CASE("H operator, inverse, and weighted inner product") {
  const DiagWeights id = DiagWeights::identity(2, 3);
  Xoshiro256pp rng(7);
  const Eigen::MatrixXd Y = gaussian_matrix(rng, 2, 3);
  CHECK((apply_h(id, Y) - Y).norm() == 0.0);
  CHECK((apply_h_inv(id, Y) - Y).norm() == 0.0);
  CHECK(weighted_inner(id, Y, Y) == doctest::Approx(Y.squaredNorm()));

  Eigen::VectorXd lh(1), rh(1);
  lh << 2.0;
  rh << 3.0;
  const DiagWeights w = DiagWeights::from_half_diagonals(lh, rh);
  Eigen::MatrixXd one(1, 1);
  one << 1.0;
  CHECK(apply_h(w, one)(0, 0) == 6.0);
  Eigen::MatrixXd six(1, 1);
  six << 6.0;
  CHECK(apply_h_inv(w, six)(0, 0) == doctest::Approx(1.0));
  CHECK(weighted_inner(w, one, one) == doctest::Approx(6.0));

  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXd K = gaussian_matrix(rng, 2, 3);
    const Eigen::MatrixXd round = apply_h(id, apply_h_inv(id, K));
    CHECK((round - K).norm() <= 1e-14 * (1.0 + K.norm()));
  }
}

TEST_CASE("weight diagonals must be positive and reciprocal-consistent") {
  Eigen::VectorXd bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(DiagWeights::from_half_diagonals(bad, Eigen::VectorXd::Ones(2)),
                  invalid_value_error);

  const DiagWeights w = DiagWeights::identity(4, 4);
  CHECK((w.l_half.cwiseProduct(w.l_neg_half).array() - 1.0).abs().maxCoeff() <= 1e-14);
  CHECK(w.is_identity());
}
