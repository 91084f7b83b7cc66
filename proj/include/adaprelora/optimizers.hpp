#pragma once

// Full optimizer step loops over one m x n layer: the preconditioned
// balance-optimal update with plain SGD and with momentum (w-space or
// factor-space moments), plus the baselines used in the benchmarks.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <utility>

#include "adaprelora/adafactor.hpp"
#include "adaprelora/generator.hpp"
#include "adaprelora/solver.hpp"

namespace adaprelora {

enum class MomentumMode { none, w_space, factor_space };
enum class GradientSource { exact, surrogate };

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double weight_decay = 0.0;                          // lambda
  double decay_row = kDefaultDecay;                   // statistics EMA
  double decay_col = kDefaultDecay;
  double momentum_decay = 0.9;                        // beta3
  double eps = kDefaultEps;
  MomentumMode momentum_mode = MomentumMode::none;
  GradientSource gradient_source = GradientSource::exact;

  void validate() const;  // throws invalid_value_error on bad fields
};

/// First-moment buffer. Exactly one representation is populated, per the
/// configured mode: a full m x n matrix, or the (m+n)r factor pair.
struct MomentumState {
  MomentumMode mode = MomentumMode::none;
  Eigen::MatrixXd M;    // m x n     (w_space)
  Eigen::MatrixXd M_B;  // m x r     (factor_space)
  Eigen::MatrixXd M_A;  // r x n     (factor_space)
  std::int64_t step_count = 0;

  static MomentumState fresh(MomentumMode mode, Eigen::Index m, Eigen::Index n, Eigen::Index r);
  /// Persisted moment scalars: mn for w_space, (m+n)r for factor_space.
  Eigen::Index moment_scalar_count() const;
};

/// B = 0, A uniform on [-1/sqrt(n), +1/sqrt(n)] from the seeded generator;
/// identical seeds give bit-identical factors. A is filled in column-major
/// order.
FactorPair init_factors(Eigen::Index m, Eigen::Index n, Eigen::Index r, std::uint64_t seed);

/// One statistics-then-update step of the preconditioned balance-optimal
/// method: no weight decay, no bias correction.
std::pair<FactorPair, AdafactorState> step_adaprelora_sgd(const FactorPair& fp,
                                                          const AdafactorState& state,
                                                          const Eigen::MatrixXd& G,
                                                          const OptimizerConfig& cfg);

/// Momentum variant with decoupled weight decay and the bias factor
/// c_t = sqrt(1 - decay_row^t) / (1 - beta3^t).
std::tuple<FactorPair, AdafactorState, MomentumState> step_adaprelora_momentum(
    const FactorPair& fp, const AdafactorState& state, const MomentumState& mstate,
    const Eigen::MatrixXd& G, const OptimizerConfig& cfg);

/// Plain SGD on the chain-rule factor gradients.
FactorPair step_factor_sgd(const FactorPair& fp, const Eigen::MatrixXd& G,
                           const OptimizerConfig& cfg);

/// Block-diagonal preconditioned baseline:
///   B' = B - eta G_B (A A^T + eps I)^{-1},  A' = A - eta (B^T B + eps I)^{-1} G_A.
FactorPair step_scaled_gd(const FactorPair& fp, const Eigen::MatrixXd& G,
                          const OptimizerConfig& cfg);

/// The identity-weight member of the family: Frobenius projection baseline.
FactorPair step_identity_projected(const FactorPair& fp, const Eigen::MatrixXd& G,
                                   const OptimizerConfig& cfg);

/// Named optimizer kinds driven by the harness and the C API.
enum class OptimizerKind {
  adaprelora_sgd,
  adaprelora_momentum,
  factor_sgd,
  scaled_gd,
  identity_projected,
};

const char* optimizer_kind_name(OptimizerKind kind);
std::optional<OptimizerKind> optimizer_kind_from_name(const std::string& name);

/// Owns one layer's factors and optimizer state; steps are strictly
/// sequential. Distinct sessions are independent.
class OptimizerSession {
 public:
  OptimizerSession(OptimizerKind kind, Eigen::Index m, Eigen::Index n, Eigen::Index r,
                   OptimizerConfig cfg, std::uint64_t init_seed);

  void step(const Eigen::MatrixXd& G);
  const FactorPair& factors() const { return fp_; }
  OptimizerKind kind() const { return kind_; }
  /// Persisted optimizer-state scalars beyond the factors themselves.
  Eigen::Index state_scalar_count() const;

 private:
  OptimizerKind kind_;
  OptimizerConfig cfg_;
  FactorPair fp_;
  AdafactorState state_;
  MomentumState mstate_;
};

}  // namespace adaprelora
