#pragma once

// Seeded matrix generators shared by the benchmark problems, the
// verification suites, and the tests. Fill order is column-major
// (Eigen's storage order) so streams are reproducible bit-for-bit.

#include <Eigen/Dense>

#include "adaprelora/rng.hpp"

namespace adaprelora {

inline Eigen::MatrixXd gaussian_matrix(Xoshiro256pp& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.normal();
  return out;
}

inline Eigen::MatrixXd uniform_matrix(Xoshiro256pp& rng, Eigen::Index rows, Eigen::Index cols,
                                      double lo, double hi) {
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.uniform(lo, hi);
  return out;
}

/// rows x cols matrix with orthonormal columns (cols <= rows), from the
/// thin QR of a Gaussian draw.
inline Eigen::MatrixXd orthonormal_columns(Xoshiro256pp& rng, Eigen::Index rows,
                                           Eigen::Index cols) {
  Eigen::MatrixXd g = gaussian_matrix(rng, rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  // Fix column signs so the result does not depend on QR sign conventions.
  Eigen::MatrixXd rmat = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (rmat(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

/// rows x cols matrix with the prescribed singular values (descending).
inline Eigen::MatrixXd matrix_with_spectrum(Xoshiro256pp& rng, Eigen::Index rows,
                                            Eigen::Index cols,
                                            const Eigen::VectorXd& singular_values) {
  const Eigen::Index k = singular_values.size();
  Eigen::MatrixXd u = orthonormal_columns(rng, rows, k);
  Eigen::MatrixXd v = orthonormal_columns(rng, cols, k);
  return u * singular_values.asDiagonal() * v.transpose();
}

/// Full-rank factor draw: singular values uniform in [0.3, 1.5], so
/// sigma_min >= 0.1 holds with margin on every instance.
inline Eigen::MatrixXd full_rank_matrix(Xoshiro256pp& rng, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index k = std::min(rows, cols);
  Eigen::VectorXd sv(k);
  for (Eigen::Index i = 0; i < k; ++i) sv(i) = rng.uniform(0.3, 1.5);
  return matrix_with_spectrum(rng, rows, cols, sv);
}

}  // namespace adaprelora
