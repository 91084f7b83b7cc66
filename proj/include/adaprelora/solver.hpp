#pragma once

// The weighted least-squares factor update: the gauge-parameterized
// solution family, the imbalance criterion that selects a unique element,
// the optimal gauge in closed form, and the resulting one-shot factor
// update with the half-projector structure.
//
// Both r x r Grams are always regularized with eps*I before inversion, so
// every operation here is total (branch-free); property tests that need
// near-exact identities pass eps = 1e-12.

#include <Eigen/Dense>

#include "adaprelora/adafactor.hpp"
#include "adaprelora/generator.hpp"

namespace adaprelora {

/// W-space gradient together with the induced factor gradients. The factor
/// gradients are always recomputed from G via the chain rule (G_B = G A^T,
/// G_A = B^T G) rather than trusted from the caller.
struct GradientBundle {
  Eigen::MatrixXd G;    // m x n
  Eigen::MatrixXd G_B;  // m x r
  Eigen::MatrixXd G_A;  // r x n

  GradientBundle(const FactorPair& fp, const Eigen::MatrixXd& grad);
};

/// A candidate factor update with its induced W-space direction cached.
struct UpdateDelta {
  Eigen::MatrixXd dB;         // m x r
  Eigen::MatrixXd dA;         // r x n
  Eigen::MatrixXd induced_w;  // dB*A + B*dA

  UpdateDelta(const FactorPair& fp, Eigen::MatrixXd db, Eigen::MatrixXd da);
};

/// Free r x r matrix selecting an element of the solution family.
struct GaugeParameter {
  Eigen::MatrixXd X;
};

/// Condition threshold above which the regularized Gram solve logs a warning
/// (it does not abort).
inline constexpr double kGramConditionWarnThreshold = 1e10;

/// The gauge-parameterized minimizer family:
///   dB = (I - P_B) L^{-1/2} G_B (A R^{1/2} A^T + eps I)^{-1} - B X
///   dA = (B^T L^{1/2} B + eps I)^{-1} G_A R^{-1/2} + X A
/// with P_B = B (B^T L^{1/2} B + eps I)^{-1} B^T L^{1/2}. Every member
/// induces the same W-direction (up to eps effects).
UpdateDelta family_solution(const FactorPair& fp, const DiagWeights& w, const GradientBundle& gb,
                            const GaugeParameter& x, double eps = kDefaultEps);

/// Imbalance between the two factor contributions to the W-update:
///   0.5 * || dB*A - B*dA ||_H^2.
double imbalance(const FactorPair& fp, const DiagWeights& w, const UpdateDelta& d);

/// The gauge minimizing the imbalance over the family:
///   X = -1/2 (B^T L^{1/2} B + eps I)^{-1} B^T G A^T (A R^{1/2} A^T + eps I)^{-1}.
GaugeParameter optimal_gauge(const FactorPair& fp, const DiagWeights& w, const GradientBundle& gb,
                             double eps = kDefaultEps);

/// The balance-optimal update in one shot (family_solution at optimal_gauge):
///   dB = (I - 1/2 P_B) L^{-1/2} G_B (A R^{1/2} A^T + eps I)^{-1}
///   dA = (B^T L^{1/2} B + eps I)^{-1} G_A R^{-1/2} (I - 1/2 Q_A)
/// with Q_A = R^{1/2} A^T (A R^{1/2} A^T + eps I)^{-1} A. The induced
/// W-direction is the H-orthogonal projection of H^{-1} G onto range(J).
UpdateDelta closed_form_update(const FactorPair& fp, const DiagWeights& w,
                               const GradientBundle& gb, double eps = kDefaultEps);

/// Same closed form fed with factor gradients directly; the update needs the
/// full gradient only through G_B and G_A, which is what lets factor-space
/// momentum avoid an m x n moment buffer.
UpdateDelta closed_form_update_from_factor_grads(const FactorPair& fp, const DiagWeights& w,
                                                 const Eigen::MatrixXd& G_B,
                                                 const Eigen::MatrixXd& G_A,
                                                 double eps = kDefaultEps);

}  // namespace adaprelora
