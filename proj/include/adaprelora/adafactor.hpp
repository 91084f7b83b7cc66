#pragma once

// Adafactor row/column second-moment statistics and the induced diagonal
// Kronecker operator H: Y -> L^{1/2} Y R^{1/2}, its inverse, and the
// weighted inner product <Y, Z>_H = <H Y, Z>.

#include <Eigen/Dense>
#include <cstdint>

namespace adaprelora {

inline constexpr double kDefaultDecay = 0.98;
inline constexpr double kDefaultEps = 1e-6;

/// Running second-moment statistics for one m x n layer. Stores exactly
/// m + n statistic scalars.
struct AdafactorState {
  Eigen::VectorXd l;  // length m, row sums of the squared-gradient EMA
  Eigen::VectorXd r;  // length n, column sums of the squared-gradient EMA
  double decay_row = kDefaultDecay;
  double decay_col = kDefaultDecay;
  double eps = kDefaultEps;
  std::int64_t step_count = 0;

  static AdafactorState fresh(Eigen::Index m, Eigen::Index n, double decay_row = kDefaultDecay,
                              double decay_col = kDefaultDecay, double eps = kDefaultEps);

  Eigen::Index m() const { return l.size(); }
  Eigen::Index n() const { return r.size(); }
  /// Number of persisted statistic scalars (the O(m+n) memory claim).
  Eigen::Index statistic_scalar_count() const { return l.size() + r.size(); }
};

/// Materialized diagonals of L^{1/2}, R^{1/2} and their reciprocals.
/// All entries strictly positive by construction.
struct DiagWeights {
  Eigen::VectorXd l_half;      // length m
  Eigen::VectorXd r_half;      // length n
  Eigen::VectorXd l_neg_half;  // entrywise 1 / l_half
  Eigen::VectorXd r_neg_half;  // entrywise 1 / r_half

  static DiagWeights from_half_diagonals(Eigen::VectorXd l_half, Eigen::VectorXd r_half);
  static DiagWeights identity(Eigen::Index m, Eigen::Index n);

  Eigen::Index m() const { return l_half.size(); }
  Eigen::Index n() const { return r_half.size(); }
  bool is_identity() const {
    return (l_half.array() == 1.0).all() && (r_half.array() == 1.0).all();
  }
};

/// EMA update of the statistics from the squared gradient's row/column sums.
/// Rejects non-finite gradients. Returns a new state; does not mutate.
AdafactorState update_stats(const AdafactorState& state, const Eigen::MatrixXd& G);

/// Normalized, eps-floored diagonals: L = diag(max(l_i/sqrt(|l|_1), eps)),
/// then the 1/2 powers. An all-zero statistic vector floors every entry at
/// eps, so the weights are always invertible.
DiagWeights build_weights(const AdafactorState& state);

/// H Y = diag(l_half) * Y * diag(r_half).
Eigen::MatrixXd apply_h(const DiagWeights& w, const Eigen::MatrixXd& Y);

/// H^{-1} K = diag(l_neg_half) * K * diag(r_neg_half).
Eigen::MatrixXd apply_h_inv(const DiagWeights& w, const Eigen::MatrixXd& K);

/// <Y, Z>_H = <H Y, Z> under the Frobenius pairing.
double weighted_inner(const DiagWeights& w, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z);

/// sqrt(<Y, Y>_H).
double weighted_norm(const DiagWeights& w, const Eigen::MatrixXd& Y);

}  // namespace adaprelora
