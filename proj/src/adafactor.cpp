#include "adaprelora/adafactor.hpp"

#include <cmath>

#include "adaprelora/errors.hpp"

namespace adaprelora {

AdafactorState AdafactorState::fresh(Eigen::Index m, Eigen::Index n, double decay_row,
                                     double decay_col, double eps) {
  if (m < 1 || n < 1) throw dimension_error("adafactor: dimensions must be positive");
  if (decay_row < 0.0 || decay_row > 1.0 || decay_col < 0.0 || decay_col > 1.0)
    throw invalid_value_error("adafactor: decay rates must lie in [0, 1]");
  if (!(eps > 0.0)) throw invalid_value_error("adafactor: eps must be positive");
  AdafactorState s;
  s.l = Eigen::VectorXd::Zero(m);
  s.r = Eigen::VectorXd::Zero(n);
  s.decay_row = decay_row;
  s.decay_col = decay_col;
  s.eps = eps;
  s.step_count = 0;
  return s;
}

AdafactorState update_stats(const AdafactorState& state, const Eigen::MatrixXd& G) {
  if (G.rows() != state.m() || G.cols() != state.n())
    throw dimension_error("adafactor: gradient shape does not match state");
  if (!G.allFinite()) throw invalid_value_error("adafactor: gradient contains non-finite values");

  const Eigen::MatrixXd g2 = G.cwiseProduct(G);
  AdafactorState next = state;
  next.l = state.decay_row * state.l + (1.0 - state.decay_row) * g2.rowwise().sum();
  next.r = state.decay_col * state.r + (1.0 - state.decay_col) * g2.colwise().sum().transpose();
  next.step_count = state.step_count + 1;
  return next;
}

namespace {

Eigen::VectorXd half_power_diagonal(const Eigen::VectorXd& stats, double eps) {
  const double total = stats.sum();  // entries are nonnegative, so this is |.|_1
  if (total <= 0.0) return Eigen::VectorXd::Constant(stats.size(), std::sqrt(eps));
  const double inv_root = 1.0 / std::sqrt(total);
  return (stats * inv_root).cwiseMax(eps).cwiseSqrt();
}

}  // namespace

DiagWeights build_weights(const AdafactorState& state) {
  return DiagWeights::from_half_diagonals(half_power_diagonal(state.l, state.eps),
                                          half_power_diagonal(state.r, state.eps));
}

DiagWeights DiagWeights::from_half_diagonals(Eigen::VectorXd l_half, Eigen::VectorXd r_half) {
  if (!(l_half.array() > 0.0).all() || !(r_half.array() > 0.0).all())
    throw invalid_value_error("adafactor: weight diagonals must be strictly positive");
  DiagWeights w;
  w.l_neg_half = l_half.cwiseInverse();
  w.r_neg_half = r_half.cwiseInverse();
  w.l_half = std::move(l_half);
  w.r_half = std::move(r_half);
  return w;
}

DiagWeights DiagWeights::identity(Eigen::Index m, Eigen::Index n) {
  return from_half_diagonals(Eigen::VectorXd::Ones(m), Eigen::VectorXd::Ones(n));
}

namespace {

void check_shape(const DiagWeights& w, const Eigen::MatrixXd& Y) {
  if (Y.rows() != w.m() || Y.cols() != w.n())
    throw dimension_error("adafactor: matrix shape does not match weights");
}

}  // namespace

Eigen::MatrixXd apply_h(const DiagWeights& w, const Eigen::MatrixXd& Y) {
  check_shape(w, Y);
  return w.l_half.asDiagonal() * Y * w.r_half.asDiagonal();
}

Eigen::MatrixXd apply_h_inv(const DiagWeights& w, const Eigen::MatrixXd& K) {
  check_shape(w, K);
  return w.l_neg_half.asDiagonal() * K * w.r_neg_half.asDiagonal();
}

double weighted_inner(const DiagWeights& w, const Eigen::MatrixXd& Y, const Eigen::MatrixXd& Z) {
  check_shape(w, Y);
  check_shape(w, Z);
  return apply_h(w, Y).cwiseProduct(Z).sum();
}

double weighted_norm(const DiagWeights& w, const Eigen::MatrixXd& Y) {
  return std::sqrt(std::max(0.0, weighted_inner(w, Y, Y)));
}

}  // namespace adaprelora
