#include "adaprelora/generator.hpp"

#include <string>

#include "adaprelora/errors.hpp"

namespace adaprelora {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw dimension_error(std::string("generator: ") + what);
}

void check_direction(const FactorPair& fp, const FactorDirection& d) {
  require(d.P.rows() == fp.m() && d.P.cols() == fp.r(), "direction P shape mismatch");
  require(d.Q.rows() == fp.r() && d.Q.cols() == fp.n(), "direction Q shape mismatch");
}

void check_w(const FactorPair& fp, const Eigen::MatrixXd& C) {
  require(C.rows() == fp.m() && C.cols() == fp.n(), "W-space matrix shape mismatch");
}

}  // namespace

FactorPair::FactorPair(Eigen::MatrixXd b, Eigen::MatrixXd a) : B(std::move(b)), A(std::move(a)) {
  require(B.cols() == A.rows(), "factor inner dimensions disagree on r");
  require(B.cols() >= 1, "rank must be positive");
  require(B.cols() <= std::min(B.rows(), A.cols()), "rank exceeds min(m, n)");
}

double direction_inner(const FactorDirection& a, const FactorDirection& b) {
  return a.P.cwiseProduct(b.P).sum() + a.Q.cwiseProduct(b.Q).sum();
}

Eigen::MatrixXd apply_jacobian(const FactorPair& fp, const FactorDirection& d) {
  check_direction(fp, d);
  return d.P * fp.A + fp.B * d.Q;
}

FactorDirection apply_adjoint(const FactorPair& fp, const Eigen::MatrixXd& C) {
  check_w(fp, C);
  return {C * fp.A.transpose(), fp.B.transpose() * C};
}

Eigen::MatrixXd jacobian_gram_w(const FactorPair& fp, const Eigen::MatrixXd& C) {
  check_w(fp, C);
  return C * fp.A.transpose() * fp.A + fp.B * fp.B.transpose() * C;
}

FactorDirection jacobian_gram_factor(const FactorPair& fp, const FactorDirection& d) {
  check_direction(fp, d);
  const Eigen::MatrixXd pa = d.P * fp.A;
  const Eigen::MatrixXd bq = fp.B * d.Q;
  return {pa * fp.A.transpose() + bq * fp.A.transpose(),
          fp.B.transpose() * pa + fp.B.transpose() * bq};
}

FactorDirection kernel_direction(const FactorPair& fp, const Eigen::MatrixXd& X) {
  require(X.rows() == fp.r() && X.cols() == fp.r(), "gauge matrix must be r x r");
  return {fp.B * X, -(X * fp.A)};
}

Eigen::VectorXd vectorize(const Eigen::MatrixXd& M) {
  return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
}

Eigen::VectorXd vectorize_direction(const FactorDirection& d) {
  Eigen::VectorXd v(d.P.size() + d.Q.size());
  v.head(d.P.size()) = vectorize(d.P);
  v.tail(d.Q.size()) = vectorize(d.Q);
  return v;
}

FactorDirection unvectorize_direction(const Eigen::VectorXd& v, Eigen::Index m, Eigen::Index n,
                                      Eigen::Index r) {
  require(v.size() == (m + n) * r, "direction vector length mismatch");
  FactorDirection d = FactorDirection::zero(m, n, r);
  d.P = Eigen::Map<const Eigen::MatrixXd>(v.data(), m, r);
  d.Q = Eigen::Map<const Eigen::MatrixXd>(v.data() + m * r, r, n);
  return d;
}

Eigen::MatrixXd vectorized_jacobian(const FactorPair& fp) {
  const Eigen::Index m = fp.m(), n = fp.n(), r = fp.r();
  Eigen::MatrixXd J(m * n, (m + n) * r);
  // P block: basis direction (e_i e_k^T, 0) maps to e_i (row k of A).
  for (Eigen::Index k = 0; k < r; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const Eigen::Index col = k * m + i;  // column-major order over P
      Eigen::Map<Eigen::MatrixXd> img(J.col(col).data(), m, n);
      img.setZero();
      img.row(i) = fp.A.row(k);
    }
  }
  // Q block: basis direction (0, e_k e_j^T) maps to (column k of B) e_j^T.
  const Eigen::Index q_offset = m * r;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index k = 0; k < r; ++k) {
      const Eigen::Index col = q_offset + j * r + k;  // column-major order over Q
      Eigen::Map<Eigen::MatrixXd> img(J.col(col).data(), m, n);
      img.setZero();
      img.col(j) = fp.B.col(k);
    }
  }
  return J;
}

}  // namespace adaprelora
