#pragma once

// Brute-force reference implementations used only for verification. The
// routines here never call the closed forms in solver.hpp; they solve the
// weighted least-squares problem densely (vectorized Jacobian + SVD
// pseudoinverse) and resolve the gauge ambiguity by numerically minimizing
// the imbalance over the kernel basis. Orders of magnitude slower than the
// closed forms; desk scale only.

#include <Eigen/Dense>
#include <functional>

#include "adaprelora/adafactor.hpp"
#include "adaprelora/generator.hpp"
#include "adaprelora/solver.hpp"

namespace adaprelora {

/// Singular values below cutoff_rel * sigma_max are treated as zero in the
/// dense pseudoinverse solve.
inline constexpr double kOraclePinvCutoffRel = 1e-10;

/// Refuse to materialize a vectorized Jacobian larger than this.
inline constexpr Eigen::Index kOracleMaxJacobianEntries = 4'000'000;

struct BruteForceUpdate {
  UpdateDelta balanced;  // imbalance-minimizing member of the solution set
  UpdateDelta min_norm;  // minimum-Frobenius-norm member (pure pseudoinverse)
};

/// Solves min_d || D^{1/2} (J d - vec(H^{-1} G)) ||_2 densely, where D is
/// the diagonal of the vectorized H, then minimizes the imbalance over the
/// r^2 kernel coefficients by assembling and solving the small SPD normal
/// system. Returns both the balanced and the minimum-norm elements.
BruteForceUpdate brute_force_update(const FactorPair& fp, const DiagWeights& w,
                                    const Eigen::MatrixXd& G);

/// Central finite differences of a scalar function of a matrix:
/// (f(X + h E_ij) - f(X - h E_ij)) / (2h), entry by entry. h must lie in
/// [1e-7, 1e-4]; non-finite f values raise invalid_value_error.
Eigen::MatrixXd finite_diff_gradient(const std::function<double(const Eigen::MatrixXd&)>& f,
                                     const Eigen::MatrixXd& at, double h = 1e-5);

}  // namespace adaprelora
