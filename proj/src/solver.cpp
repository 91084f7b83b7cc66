#include "adaprelora/solver.hpp"

#include <atomic>
#include <string>

#include "adaprelora/errors.hpp"
#include "adaprelora/logging.hpp"

namespace adaprelora {

namespace {

// Long optimization runs can sit in ill-conditioned phases for thousands of
// steps; cap the noise instead of logging every solve.
void warn_ill_conditioned(const char* which) {
  static std::atomic<long> count{0};
  const long n = count.fetch_add(1);
  if (n < 5)
    warn(std::string("solver: ") + which + " Gram condition exceeds 1e10 after eps*I");
  else if (n == 5)
    warn("solver: further Gram condition warnings suppressed");
}

// eps-regularized SPD solve; warns above the condition threshold but never
// aborts.
class RegularizedGram {
 public:
  RegularizedGram(const Eigen::MatrixXd& gram, double eps, const char* which) {
    Eigen::MatrixXd reg = gram;
    reg.diagonal().array() += eps;
    eig_.compute(reg);
    const double lo = eig_.eigenvalues().minCoeff();
    const double hi = eig_.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kGramConditionWarnThreshold) warn_ill_conditioned(which);
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    Eigen::MatrixXd coeff = eig_.eigenvectors().transpose() * rhs;
    coeff.array().colwise() /= eig_.eigenvalues().array();
    return eig_.eigenvectors() * coeff;
  }

  // rhs * gram^{-1} for row-shaped right-hand sides.
  Eigen::MatrixXd solve_right(const Eigen::MatrixXd& rhs) const {
    return solve(rhs.transpose()).transpose();
  }

 private:
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
};

void check_weights(const FactorPair& fp, const DiagWeights& w) {
  if (w.m() != fp.m() || w.n() != fp.n())
    throw dimension_error("solver: weights shape does not match factors");
}

}  // namespace

GradientBundle::GradientBundle(const FactorPair& fp, const Eigen::MatrixXd& grad) : G(grad) {
  if (G.rows() != fp.m() || G.cols() != fp.n())
    throw dimension_error("solver: gradient shape does not match factors");
  G_B = G * fp.A.transpose();
  G_A = fp.B.transpose() * G;
}

UpdateDelta::UpdateDelta(const FactorPair& fp, Eigen::MatrixXd db, Eigen::MatrixXd da)
    : dB(std::move(db)), dA(std::move(da)) {
  if (dB.rows() != fp.m() || dB.cols() != fp.r() || dA.rows() != fp.r() || dA.cols() != fp.n())
    throw dimension_error("solver: update shape does not match factors");
  induced_w = apply_jacobian(fp, {dB, dA});
}

UpdateDelta family_solution(const FactorPair& fp, const DiagWeights& w, const GradientBundle& gb,
                            const GaugeParameter& x, double eps) {
  check_weights(fp, w);
  if (x.X.rows() != fp.r() || x.X.cols() != fp.r())
    throw dimension_error("solver: gauge matrix must be r x r");
  const Eigen::MatrixXd& B = fp.B;
  const Eigen::MatrixXd& A = fp.A;

  const Eigen::MatrixXd lhalf_B = w.l_half.asDiagonal() * B;  // L^{1/2} B
  const Eigen::MatrixXd A_rhalf = A * w.r_half.asDiagonal();  // A R^{1/2}
  const RegularizedGram gram_b(B.transpose() * lhalf_B, eps, "B-side");
  const RegularizedGram gram_a(A_rhalf * A.transpose(), eps, "A-side");

  // (I - P_B) L^{-1/2} G_B (A R^{1/2} A^T + eps I)^{-1} - B X
  const Eigen::MatrixXd base_b =
      gram_a.solve_right(w.l_neg_half.asDiagonal() * gb.G_B);  // L^{-1/2} G_B S_A
  Eigen::MatrixXd db = base_b - B * gram_b.solve(lhalf_B.transpose() * base_b) - B * x.X;

  // (B^T L^{1/2} B + eps I)^{-1} G_A R^{-1/2} + X A
  Eigen::MatrixXd da = gram_b.solve(gb.G_A) * w.r_neg_half.asDiagonal() + x.X * A;

  return UpdateDelta(fp, std::move(db), std::move(da));
}

double imbalance(const FactorPair& fp, const DiagWeights& w, const UpdateDelta& d) {
  check_weights(fp, w);
  const Eigen::MatrixXd gap = d.dB * fp.A - fp.B * d.dA;
  const double norm = weighted_norm(w, gap);
  return 0.5 * norm * norm;
}

GaugeParameter optimal_gauge(const FactorPair& fp, const DiagWeights& w, const GradientBundle& gb,
                             double eps) {
  check_weights(fp, w);
  const Eigen::MatrixXd& B = fp.B;
  const Eigen::MatrixXd& A = fp.A;
  const Eigen::MatrixXd lhalf_B = w.l_half.asDiagonal() * B;
  const Eigen::MatrixXd A_rhalf = A * w.r_half.asDiagonal();
  const RegularizedGram gram_b(B.transpose() * lhalf_B, eps, "B-side");
  const RegularizedGram gram_a(A_rhalf * A.transpose(), eps, "A-side");

  const Eigen::MatrixXd core = B.transpose() * gb.G * A.transpose();  // B^T G A^T
  return {-0.5 * gram_a.solve_right(gram_b.solve(core))};
}

UpdateDelta closed_form_update_from_factor_grads(const FactorPair& fp, const DiagWeights& w,
                                                 const Eigen::MatrixXd& G_B,
                                                 const Eigen::MatrixXd& G_A, double eps) {
  check_weights(fp, w);
  const Eigen::MatrixXd& B = fp.B;
  const Eigen::MatrixXd& A = fp.A;
  if (G_B.rows() != fp.m() || G_B.cols() != fp.r() || G_A.rows() != fp.r() ||
      G_A.cols() != fp.n())
    throw dimension_error("solver: factor gradient shape mismatch");

  const Eigen::MatrixXd lhalf_B = w.l_half.asDiagonal() * B;
  const Eigen::MatrixXd A_rhalf = A * w.r_half.asDiagonal();
  const RegularizedGram gram_b(B.transpose() * lhalf_B, eps, "B-side");
  const RegularizedGram gram_a(A_rhalf * A.transpose(), eps, "A-side");

  // dB = (I - 1/2 P_B) L^{-1/2} G_B (A R^{1/2} A^T + eps I)^{-1}
  const Eigen::MatrixXd base_b = gram_a.solve_right(w.l_neg_half.asDiagonal() * G_B);
  Eigen::MatrixXd db = base_b - 0.5 * (B * gram_b.solve(lhalf_B.transpose() * base_b));

  // dA = (B^T L^{1/2} B + eps I)^{-1} G_A R^{-1/2} (I - 1/2 Q_A)
  const Eigen::MatrixXd base_a = gram_b.solve(G_A) * w.r_neg_half.asDiagonal();
  Eigen::MatrixXd da =
      base_a - 0.5 * (gram_a.solve_right(base_a * A_rhalf.transpose()) * A);

  return UpdateDelta(fp, std::move(db), std::move(da));
}

UpdateDelta closed_form_update(const FactorPair& fp, const DiagWeights& w,
                               const GradientBundle& gb, double eps) {
  return closed_form_update_from_factor_grads(fp, w, gb.G_B, gb.G_A, eps);
}

}  // namespace adaprelora
