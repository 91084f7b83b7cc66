#include "adaprelora/problems.hpp"

#include <cmath>
#include <cstddef>
#include <utility>

#include "adaprelora/errors.hpp"
#include "adaprelora/random_matrices.hpp"
#include "adaprelora/rng.hpp"

namespace adaprelora {

namespace {

Eigen::VectorXd geometric_spectrum(Eigen::Index k, double kappa) {
  // Descending from kappa * s_min to s_min with s_min = 1; a single planted
  // value sits at the kappa endpoint.
  Eigen::VectorXd sv(k);
  if (k == 1) {
    sv(0) = kappa;
    return sv;
  }
  for (Eigen::Index i = 0; i < k; ++i)
    sv(i) = std::pow(kappa, static_cast<double>(k - 1 - i) / static_cast<double>(k - 1));
  return sv;
}

}  // namespace

ProblemInstance make_problem(ProblemKind kind, Eigen::Index m, Eigen::Index n,
                             Eigen::Index planted_rank, double condition_number,
                             std::uint64_t seed) {
  if (m < 1 || n < 1 || planted_rank < 1 || planted_rank > std::min(m, n))
    throw dimension_error("problem: invalid dimensions");
  if (!(condition_number >= 1.0))
    throw invalid_value_error("problem: condition number must be >= 1");

  ProblemInstance p;
  p.kind = kind;
  p.condition_number = condition_number;
  p.planted_rank = planted_rank;
  p.seed = seed;

  Xoshiro256pp base_rng(derive_seed(seed, 0x57));
  p.W0 = gaussian_matrix(base_rng, m, n);

  Xoshiro256pp residual_rng(derive_seed(seed, 0x01));
  const Eigen::MatrixXd residual =
      matrix_with_spectrum(residual_rng, m, n, geometric_spectrum(planted_rank, condition_number));
  p.target = p.W0 + residual;

  if (kind == ProblemKind::sensing) {
    const Eigen::Index count = kSensingOversampling * planted_rank * (m + n);
    Xoshiro256pp sensing_rng(derive_seed(seed, 0x5e));
    p.measurements.reserve(static_cast<std::size_t>(count));
    p.observations.resize(count);
    for (Eigen::Index i = 0; i < count; ++i) {
      p.measurements.push_back(gaussian_matrix(sensing_rng, m, n));
      p.observations(i) = p.measurements.back().cwiseProduct(p.target).sum();
    }
  }
  return p;
}

std::pair<double, Eigen::MatrixXd> loss_and_gradient(const ProblemInstance& p,
                                                     const FactorPair& fp) {
  if (fp.m() != p.m() || fp.n() != p.n())
    throw dimension_error("problem: factor shape does not match instance");
  const Eigen::MatrixXd W = p.W0 + fp.product();

  if (p.kind == ProblemKind::recovery) {
    const Eigen::MatrixXd diff = W - p.target;
    return {0.5 * diff.squaredNorm(), diff};
  }

  double loss = 0.0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(p.m(), p.n());
  for (Eigen::Index i = 0; i < p.observations.size(); ++i) {
    const double gap = p.measurements[static_cast<std::size_t>(i)].cwiseProduct(W).sum() -
                       p.observations(i);
    loss += 0.5 * gap * gap;
    grad += gap * p.measurements[static_cast<std::size_t>(i)];
  }
  return {loss, std::move(grad)};
}

}  // namespace adaprelora
