#include "adaprelora/oracle.hpp"

#include <cmath>
#include <cstddef>
#include <vector>

#include "adaprelora/errors.hpp"

namespace adaprelora {

namespace {

// Diagonal of the vectorized H operator, column-major over (i, j):
// entry k = i + j*m carries the weight l_half_i * r_half_j.
Eigen::VectorXd vectorized_h_diagonal(const DiagWeights& w) {
  const Eigen::Index m = w.m(), n = w.n();
  Eigen::VectorXd d(m * n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) d(i + j * m) = w.l_half(i) * w.r_half(j);
  return d;
}

}  // namespace

BruteForceUpdate brute_force_update(const FactorPair& fp, const DiagWeights& w,
                                    const Eigen::MatrixXd& G) {
  const Eigen::Index m = fp.m(), n = fp.n(), r = fp.r();
  if (w.m() != m || w.n() != n || G.rows() != m || G.cols() != n)
    throw dimension_error("oracle: shape mismatch");
  if (m * n * (m + n) * r > kOracleMaxJacobianEntries)
    throw dimension_error("oracle: instance exceeds desk-scale Jacobian limit");

  // Step 1-2: row-weighted dense least squares via SVD pseudoinverse.
  const Eigen::MatrixXd J = vectorized_jacobian(fp);
  const Eigen::VectorXd dvec = vectorized_h_diagonal(w);
  const Eigen::VectorXd row_scale = dvec.cwiseSqrt();
  const Eigen::MatrixXd Jw = row_scale.asDiagonal() * J;
  const Eigen::VectorXd rhs = row_scale.cwiseProduct(vectorize(apply_h_inv(w, G)));

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Jw, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = sv.size() > 0 ? kOraclePinvCutoffRel * sv(0) : 0.0;
  Eigen::VectorXd coeff = svd.matrixU().transpose() * rhs;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    coeff(i) = sv(i) > cutoff ? coeff(i) / sv(i) : 0.0;
  const Eigen::VectorXd d_min_norm = svd.matrixV() * coeff;
  const FactorDirection min_norm_dir = unvectorize_direction(d_min_norm, m, n, r);

  // Step 3: minimize the imbalance over the kernel basis {(B E_ij, -E_ij A)}.
  // The imbalance map sends the kernel direction for E_ij to 2 B E_ij A, so
  // assemble the r^2 x r^2 normal system in those images.
  const Eigen::MatrixXd gap0 = min_norm_dir.P * fp.A - fp.B * min_norm_dir.Q;
  std::vector<Eigen::MatrixXd> images;
  images.reserve(static_cast<std::size_t>(r * r));
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(r, r);
      basis(i, j) = 1.0;
      images.push_back(2.0 * (fp.B * basis * fp.A));
    }
  }
  const Eigen::Index k = static_cast<Eigen::Index>(images.size());
  Eigen::MatrixXd normal(k, k);
  Eigen::VectorXd negative_grad(k);
  for (Eigen::Index a = 0; a < k; ++a) {
    negative_grad(a) = -weighted_inner(w, images[static_cast<std::size_t>(a)], gap0);
    for (Eigen::Index b = 0; b <= a; ++b) {
      normal(a, b) = weighted_inner(w, images[static_cast<std::size_t>(a)],
                                    images[static_cast<std::size_t>(b)]);
      normal(b, a) = normal(a, b);
    }
  }
  const Eigen::VectorXd c = normal.ldlt().solve(negative_grad);

  FactorDirection balanced_dir = min_norm_dir;
  Eigen::Index idx = 0;
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < r; ++i, ++idx) {
      Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(r, r);
      basis(i, j) = c(idx);
      const FactorDirection kd = kernel_direction(fp, basis);
      balanced_dir.P += kd.P;
      balanced_dir.Q += kd.Q;
    }
  }

  return {UpdateDelta(fp, balanced_dir.P, balanced_dir.Q),
          UpdateDelta(fp, min_norm_dir.P, min_norm_dir.Q)};
}

Eigen::MatrixXd finite_diff_gradient(const std::function<double(const Eigen::MatrixXd&)>& f,
                                     const Eigen::MatrixXd& at, double h) {
  if (!(h >= 1e-7 && h <= 1e-4))
    throw invalid_value_error("oracle: finite-difference step must lie in [1e-7, 1e-4]");
  Eigen::MatrixXd grad(at.rows(), at.cols());
  Eigen::MatrixXd probe = at;
  for (Eigen::Index j = 0; j < at.cols(); ++j) {
    for (Eigen::Index i = 0; i < at.rows(); ++i) {
      probe(i, j) = at(i, j) + h;
      const double up = f(probe);
      probe(i, j) = at(i, j) - h;
      const double down = f(probe);
      probe(i, j) = at(i, j);
      if (!std::isfinite(up) || !std::isfinite(down))
        throw invalid_value_error("oracle: objective returned a non-finite value");
      grad(i, j) = (up - down) / (2.0 * h);
    }
  }
  return grad;
}

}  // namespace adaprelora
