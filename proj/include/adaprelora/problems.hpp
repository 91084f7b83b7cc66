#pragma once

// Synthetic differentiable objectives over W = W0 + B*A with analytic
// gradients, for optimizer benchmarking: low-rank recovery and noiseless
// matrix sensing, both with a planted residual of prescribed rank and
// condition number.

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "adaprelora/generator.hpp"

namespace adaprelora {

enum class ProblemKind { recovery, sensing };

/// Measurements per planted degree of freedom in the sensing problem.
inline constexpr int kSensingOversampling = 5;

struct ProblemInstance {
  ProblemKind kind = ProblemKind::recovery;
  Eigen::MatrixXd W0;       // frozen base
  Eigen::MatrixXd target;   // recovery: W0 + planted residual
  std::vector<Eigen::MatrixXd> measurements;  // sensing only
  Eigen::VectorXd observations;               // sensing only
  double condition_number = 1.0;
  Eigen::Index planted_rank = 1;
  std::uint64_t seed = 0;

  Eigen::Index m() const { return W0.rows(); }
  Eigen::Index n() const { return W0.cols(); }
};

/// Deterministic in seed. The planted residual target - W0 has exact rank
/// planted_rank with singular values geometrically spaced from
/// kappa * s_min down to s_min (s_min = 1).
ProblemInstance make_problem(ProblemKind kind, Eigen::Index m, Eigen::Index n,
                             Eigen::Index planted_rank, double condition_number,
                             std::uint64_t seed);

/// Loss and exact W-space gradient at W = W0 + B*A.
///   recovery: 0.5 || W - target ||_F^2, G = W - target
///   sensing:  0.5 sum_i (<M_i, W> - y_i)^2, G = sum_i (<M_i, W> - y_i) M_i
std::pair<double, Eigen::MatrixXd> loss_and_gradient(const ProblemInstance& p,
                                                     const FactorPair& fp);

}  // namespace adaprelora
