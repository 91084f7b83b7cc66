#include "adaprelora/optimizers.hpp"

#include <cmath>
#include <string>

#include "adaprelora/errors.hpp"
#include "adaprelora/logging.hpp"
#include "adaprelora/rng.hpp"

namespace adaprelora {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) throw invalid_value_error("optimizer: learning_rate must be > 0");
  if (weight_decay < 0.0) throw invalid_value_error("optimizer: weight_decay must be >= 0");
  if (decay_row < 0.0 || decay_row > 1.0 || decay_col < 0.0 || decay_col > 1.0)
    throw invalid_value_error("optimizer: statistic decays must lie in [0, 1]");
  if (momentum_decay < 0.0 || momentum_decay > 1.0)
    throw invalid_value_error("optimizer: momentum_decay must lie in [0, 1]");
  if (momentum_mode != MomentumMode::none && momentum_decay >= 1.0)
    throw invalid_value_error("optimizer: momentum_decay must be < 1 when momentum is enabled");
  if (!(eps > 0.0)) throw invalid_value_error("optimizer: eps must be positive");
}

MomentumState MomentumState::fresh(MomentumMode mode, Eigen::Index m, Eigen::Index n,
                                   Eigen::Index r) {
  MomentumState s;
  s.mode = mode;
  s.step_count = 0;
  if (mode == MomentumMode::w_space) {
    s.M = Eigen::MatrixXd::Zero(m, n);
  } else if (mode == MomentumMode::factor_space) {
    s.M_B = Eigen::MatrixXd::Zero(m, r);
    s.M_A = Eigen::MatrixXd::Zero(r, n);
  }
  return s;
}

Eigen::Index MomentumState::moment_scalar_count() const {
  switch (mode) {
    case MomentumMode::w_space:
      return M.size();
    case MomentumMode::factor_space:
      return M_B.size() + M_A.size();
    case MomentumMode::none:
      break;
  }
  return 0;
}

FactorPair init_factors(Eigen::Index m, Eigen::Index n, Eigen::Index r, std::uint64_t seed) {
  if (m < 1 || n < 1 || r < 1 || r > std::min(m, n))
    throw dimension_error("optimizer: invalid factor dimensions");
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m, r);
  Eigen::MatrixXd A(r, n);
  const double bound = 1.0 / std::sqrt(static_cast<double>(n));
  Xoshiro256pp rng(seed);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < r; ++i) A(i, j) = rng.uniform(-bound, bound);
  return FactorPair(std::move(B), std::move(A));
}

namespace {

Eigen::MatrixXd effective_gradient(const FactorPair& fp, const Eigen::MatrixXd& G,
                                   const OptimizerConfig& cfg) {
  if (cfg.gradient_source == GradientSource::surrogate)
    return jacobian_gram_w(fp, G);  // G_B * A + B * G_A with chain-rule factor grads
  return G;
}

FactorPair apply_step(const FactorPair& fp, const UpdateDelta& delta, double scale,
                      double shrink = 1.0) {
  return FactorPair(shrink * fp.B - scale * delta.dB, shrink * fp.A - scale * delta.dA);
}

}  // namespace

std::pair<FactorPair, AdafactorState> step_adaprelora_sgd(const FactorPair& fp,
                                                          const AdafactorState& state,
                                                          const Eigen::MatrixXd& G,
                                                          const OptimizerConfig& cfg) {
  const Eigen::MatrixXd g = effective_gradient(fp, G, cfg);
  AdafactorState next_state = update_stats(state, g);
  const DiagWeights w = build_weights(next_state);
  const GradientBundle gb(fp, g);
  const UpdateDelta delta = closed_form_update(fp, w, gb, cfg.eps);
  return {apply_step(fp, delta, cfg.learning_rate), std::move(next_state)};
}

std::tuple<FactorPair, AdafactorState, MomentumState> step_adaprelora_momentum(
    const FactorPair& fp, const AdafactorState& state, const MomentumState& mstate,
    const Eigen::MatrixXd& G, const OptimizerConfig& cfg) {
  if (mstate.mode == MomentumMode::none)
    throw invalid_value_error("optimizer: momentum step requires a momentum state");
  const Eigen::MatrixXd g = effective_gradient(fp, G, cfg);
  AdafactorState next_state = update_stats(state, g);
  const DiagWeights w = build_weights(next_state);

  MomentumState next_m = mstate;
  next_m.step_count = mstate.step_count + 1;
  const double beta3 = cfg.momentum_decay;
  const auto t = static_cast<double>(next_m.step_count);
  if (cfg.decay_row != cfg.decay_col && next_m.step_count == 1)
    warn("optimizer: bias correction uses decay_row although decay_col differs");
  const double bias =
      std::sqrt(1.0 - std::pow(cfg.decay_row, t)) / (1.0 - std::pow(beta3, t));
  const double shrink = 1.0 - cfg.weight_decay * cfg.learning_rate;
  const double scale = cfg.learning_rate * bias;

  if (mstate.mode == MomentumMode::w_space) {
    next_m.M = beta3 * mstate.M + (1.0 - beta3) * g;
    const GradientBundle gb(fp, next_m.M);
    const UpdateDelta delta = closed_form_update(fp, w, gb, cfg.eps);
    return {apply_step(fp, delta, scale, shrink), std::move(next_state), std::move(next_m)};
  }

  // factor_space: moments live on the chain-rule factor gradients, so no
  // m x n buffer is ever persisted.
  next_m.M_B = beta3 * mstate.M_B + (1.0 - beta3) * (g * fp.A.transpose());
  next_m.M_A = beta3 * mstate.M_A + (1.0 - beta3) * (fp.B.transpose() * g);
  const UpdateDelta delta =
      closed_form_update_from_factor_grads(fp, w, next_m.M_B, next_m.M_A, cfg.eps);
  return {apply_step(fp, delta, scale, shrink), std::move(next_state), std::move(next_m)};
}

FactorPair step_factor_sgd(const FactorPair& fp, const Eigen::MatrixXd& G,
                           const OptimizerConfig& cfg) {
  const GradientBundle gb(fp, G);
  return FactorPair(fp.B - cfg.learning_rate * gb.G_B, fp.A - cfg.learning_rate * gb.G_A);
}

FactorPair step_scaled_gd(const FactorPair& fp, const Eigen::MatrixXd& G,
                          const OptimizerConfig& cfg) {
  const GradientBundle gb(fp, G);
  Eigen::MatrixXd gram_a = fp.A * fp.A.transpose();
  gram_a.diagonal().array() += cfg.eps;
  Eigen::MatrixXd gram_b = fp.B.transpose() * fp.B;
  gram_b.diagonal().array() += cfg.eps;
  const Eigen::MatrixXd db = gram_a.ldlt().solve(gb.G_B.transpose()).transpose();
  const Eigen::MatrixXd da = gram_b.ldlt().solve(gb.G_A);
  return FactorPair(fp.B - cfg.learning_rate * db, fp.A - cfg.learning_rate * da);
}

FactorPair step_identity_projected(const FactorPair& fp, const Eigen::MatrixXd& G,
                                   const OptimizerConfig& cfg) {
  const GradientBundle gb(fp, G);
  const DiagWeights w = DiagWeights::identity(fp.m(), fp.n());
  const UpdateDelta delta = closed_form_update(fp, w, gb, cfg.eps);
  return apply_step(fp, delta, cfg.learning_rate);
}

const char* optimizer_kind_name(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::adaprelora_sgd:
      return "adaprelora_sgd";
    case OptimizerKind::adaprelora_momentum:
      return "adaprelora_momentum";
    case OptimizerKind::factor_sgd:
      return "factor_sgd";
    case OptimizerKind::scaled_gd:
      return "scaled_gd";
    case OptimizerKind::identity_projected:
      return "identity_projected";
  }
  return "unknown";
}

std::optional<OptimizerKind> optimizer_kind_from_name(const std::string& name) {
  for (OptimizerKind kind :
       {OptimizerKind::adaprelora_sgd, OptimizerKind::adaprelora_momentum,
        OptimizerKind::factor_sgd, OptimizerKind::scaled_gd, OptimizerKind::identity_projected}) {
    if (name == optimizer_kind_name(kind)) return kind;
  }
  return std::nullopt;
}

OptimizerSession::OptimizerSession(OptimizerKind kind, Eigen::Index m, Eigen::Index n,
                                   Eigen::Index r, OptimizerConfig cfg, std::uint64_t init_seed)
    : kind_(kind),
      cfg_(cfg),
      fp_(init_factors(m, n, r, init_seed)),
      state_(AdafactorState::fresh(m, n, cfg.decay_row, cfg.decay_col, cfg.eps)),
      mstate_(MomentumState::fresh(
          kind == OptimizerKind::adaprelora_momentum ? cfg.momentum_mode : MomentumMode::none, m,
          n, r)) {
  cfg_.validate();
  if (kind == OptimizerKind::adaprelora_momentum && cfg_.momentum_mode == MomentumMode::none) {
    // Momentum optimizer with an unset mode defaults to the recommended
    // factor-space moments.
    cfg_.momentum_mode = MomentumMode::factor_space;
    mstate_ = MomentumState::fresh(MomentumMode::factor_space, m, n, r);
  }
}

void OptimizerSession::step(const Eigen::MatrixXd& G) {
  switch (kind_) {
    case OptimizerKind::adaprelora_sgd: {
      auto [fp, state] = step_adaprelora_sgd(fp_, state_, G, cfg_);
      fp_ = std::move(fp);
      state_ = std::move(state);
      return;
    }
    case OptimizerKind::adaprelora_momentum: {
      auto [fp, state, mstate] = step_adaprelora_momentum(fp_, state_, mstate_, G, cfg_);
      fp_ = std::move(fp);
      state_ = std::move(state);
      mstate_ = std::move(mstate);
      return;
    }
    case OptimizerKind::factor_sgd:
      fp_ = step_factor_sgd(fp_, G, cfg_);
      return;
    case OptimizerKind::scaled_gd:
      fp_ = step_scaled_gd(fp_, G, cfg_);
      return;
    case OptimizerKind::identity_projected:
      fp_ = step_identity_projected(fp_, G, cfg_);
      return;
  }
}

Eigen::Index OptimizerSession::state_scalar_count() const {
  switch (kind_) {
    case OptimizerKind::adaprelora_sgd:
      return state_.statistic_scalar_count();
    case OptimizerKind::adaprelora_momentum:
      return state_.statistic_scalar_count() + mstate_.moment_scalar_count();
    default:
      return 0;
  }
}

}  // namespace adaprelora
