#pragma once

// Calculus of the low-rank generator map [B, A] -> B*A: the Jacobian
// operator, its adjoint, their compositions, the kernel family coming
// from factorization redundancy, and a dense vectorized realization used
// as an oracle at desk scale.

#include <Eigen/Dense>

namespace adaprelora {

/// Trainable low-rank factor pair: B is m x r, A is r x n, r <= min(m, n).
struct FactorPair {
  Eigen::MatrixXd B;
  Eigen::MatrixXd A;

  FactorPair(Eigen::MatrixXd b, Eigen::MatrixXd a);

  Eigen::Index m() const { return B.rows(); }
  Eigen::Index n() const { return A.cols(); }
  Eigen::Index r() const { return B.cols(); }

  /// The generated weight update B*A.
  Eigen::MatrixXd product() const { return B * A; }
};

/// A direction in factor space, shaped like the factors it perturbs.
struct FactorDirection {
  Eigen::MatrixXd P;  // m x r
  Eigen::MatrixXd Q;  // r x n

  static FactorDirection zero(Eigen::Index m, Eigen::Index n, Eigen::Index r) {
    return {Eigen::MatrixXd::Zero(m, r), Eigen::MatrixXd::Zero(r, n)};
  }
  FactorDirection operator+(const FactorDirection& o) const { return {P + o.P, Q + o.Q}; }
  FactorDirection operator-(const FactorDirection& o) const { return {P - o.P, Q - o.Q}; }
  FactorDirection operator*(double s) const { return {P * s, Q * s}; }
  double norm() const { return std::sqrt(P.squaredNorm() + Q.squaredNorm()); }
};

/// Frobenius pairing on factor space: <d1, d2> = <P1,P2> + <Q1,Q2>.
double direction_inner(const FactorDirection& a, const FactorDirection& b);

/// J(d) = P*A + B*Q.
Eigen::MatrixXd apply_jacobian(const FactorPair& fp, const FactorDirection& d);

/// J*(C) = (C*A^T, B^T*C).
FactorDirection apply_adjoint(const FactorPair& fp, const Eigen::MatrixXd& C);

/// J J*(C) = C*A^T*A + B*B^T*C.
Eigen::MatrixXd jacobian_gram_w(const FactorPair& fp, const Eigen::MatrixXd& C);

/// J* J(d) = (P*A*A^T + B*Q*A^T, B^T*P*A + B^T*B*Q).
FactorDirection jacobian_gram_factor(const FactorPair& fp, const FactorDirection& d);

/// The kernel family direction (B*X, -X*A); J maps it to zero for any X.
FactorDirection kernel_direction(const FactorPair& fp, const Eigen::MatrixXd& X);

/// Dense (m*n) x ((m+n)*r) realization of J. Column k is the column-major
/// vectorization of J applied to the k-th canonical direction; the direction
/// coordinates enumerate all of P in column-major order, then all of Q.
/// Desk scale only.
Eigen::MatrixXd vectorized_jacobian(const FactorPair& fp);

/// Column-major flattening helpers matching vectorized_jacobian's convention.
Eigen::VectorXd vectorize(const Eigen::MatrixXd& M);
Eigen::VectorXd vectorize_direction(const FactorDirection& d);
FactorDirection unvectorize_direction(const Eigen::VectorXd& v, Eigen::Index m, Eigen::Index n,
                                      Eigen::Index r);

}  // namespace adaprelora
