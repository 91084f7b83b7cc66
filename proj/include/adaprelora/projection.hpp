#pragma once

// Orthogonal projection of an m x n matrix onto range(J), the subspace of
// weight-space directions one factor step can express, under the Frobenius
// metric and under the H-weighted metric. The Gram inversions here are
// exact (no eps regularization); callers that need regularized behavior add
// eps*I themselves (the factor solver does).

#include <Eigen/Dense>

#include "adaprelora/adafactor.hpp"
#include "adaprelora/generator.hpp"

namespace adaprelora {

/// Condition-number ceiling above which the exact projectors refuse to
/// invert a Gram matrix and ask the caller to regularize.
inline constexpr double kProjectionConditionLimit = 1e12;

/// Frobenius-orthogonal projection onto range(J):
///   B (B^T B)^{-1} B^T Z + Z A^T (A A^T)^{-1} A
///     - B (B^T B)^{-1} B^T Z A^T (A A^T)^{-1} A.
/// Throws singular_error when a Gram's condition number exceeds the limit.
Eigen::MatrixXd project_standard(const FactorPair& fp, const Eigen::MatrixXd& Z);

/// H-orthogonal projection onto range(J), with weighted Grams in all three
/// terms (the cross-term Grams are B^T L^{1/2} B and A R^{1/2} A^T):
///   B (B^T L^{1/2} B)^{-1} B^T L^{1/2} Z
///     + Z R^{1/2} A^T (A R^{1/2} A^T)^{-1} A
///     - B (B^T L^{1/2} B)^{-1} B^T L^{1/2} Z R^{1/2} A^T (A R^{1/2} A^T)^{-1} A.
/// Degenerates to project_standard under identity weights.
Eigen::MatrixXd project_weighted(const FactorPair& fp, const DiagWeights& w,
                                 const Eigen::MatrixXd& Z);

}  // namespace adaprelora
