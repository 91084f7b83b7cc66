#include "adaprelora/projection.hpp"

#include <string>

#include "adaprelora/errors.hpp"

namespace adaprelora {

namespace {

// Solves gram * X = rhs with an SPD factorization after checking the
// condition number against kProjectionConditionLimit.
Eigen::MatrixXd gram_solve(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs,
                           const char* which) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kProjectionConditionLimit)
    throw singular_error(std::string("projection: ") + which +
                         " Gram is numerically singular (condition > 1e12); "
                         "regularize the factors before projecting");
  Eigen::MatrixXd coeff = eig.eigenvectors().transpose() * rhs;
  coeff.array().colwise() /= eig.eigenvalues().array();
  return eig.eigenvectors() * coeff;
}

void check_shape(const FactorPair& fp, const Eigen::MatrixXd& Z) {
  if (Z.rows() != fp.m() || Z.cols() != fp.n())
    throw dimension_error("projection: matrix shape does not match factors");
}

}  // namespace

Eigen::MatrixXd project_standard(const FactorPair& fp, const Eigen::MatrixXd& Z) {
  check_shape(fp, Z);
  const Eigen::MatrixXd& B = fp.B;
  const Eigen::MatrixXd& A = fp.A;

  // Column-space part: B (B^T B)^{-1} B^T Z.
  const Eigen::MatrixXd col_coeff = gram_solve(B.transpose() * B, B.transpose() * Z, "B");
  const Eigen::MatrixXd col_part = B * col_coeff;
  // Row-space part: Z A^T (A A^T)^{-1} A.
  const Eigen::MatrixXd row_coeff =
      gram_solve(A * A.transpose(), (Z * A.transpose()).transpose(), "A");
  const Eigen::MatrixXd row_proj = row_coeff.transpose() * A;  // Z A^T (A A^T)^{-1} A
  // Cross part removes the doubly-counted corner.
  const Eigen::MatrixXd cross = B * gram_solve(B.transpose() * B, B.transpose() * row_proj, "B");
  return col_part + row_proj - cross;
}

Eigen::MatrixXd project_weighted(const FactorPair& fp, const DiagWeights& w,
                                 const Eigen::MatrixXd& Z) {
  check_shape(fp, Z);
  if (w.m() != fp.m() || w.n() != fp.n())
    throw dimension_error("projection: weights shape does not match factors");
  const Eigen::MatrixXd& B = fp.B;
  const Eigen::MatrixXd& A = fp.A;

  const Eigen::MatrixXd lhalf_B = w.l_half.asDiagonal() * B;       // L^{1/2} B
  const Eigen::MatrixXd A_rhalf = A * w.r_half.asDiagonal();       // A R^{1/2}
  const Eigen::MatrixXd gram_b = B.transpose() * lhalf_B;          // B^T L^{1/2} B
  const Eigen::MatrixXd gram_a = A_rhalf * A.transpose();          // A R^{1/2} A^T

  // term1 = B (B^T L^{1/2} B)^{-1} B^T L^{1/2} Z
  const Eigen::MatrixXd term1 = B * gram_solve(gram_b, lhalf_B.transpose() * Z, "weighted B");
  // term2 = Z R^{1/2} A^T (A R^{1/2} A^T)^{-1} A
  const Eigen::MatrixXd zra = Z * A_rhalf.transpose();             // Z R^{1/2} A^T
  const Eigen::MatrixXd term2 = gram_solve(gram_a, zra.transpose(), "weighted A").transpose() * A;
  // term3 = B (B^T L^{1/2} B)^{-1} B^T L^{1/2} * term2 (weighted Grams throughout)
  const Eigen::MatrixXd term3 =
      B * gram_solve(gram_b, lhalf_B.transpose() * term2, "weighted B");
  return term1 + term2 - term3;
}

}  // namespace adaprelora
