#include "adaprelora/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <vector>

#include "adaprelora/oracle.hpp"
#include "adaprelora/optimizers.hpp"
#include "adaprelora/problems.hpp"
#include "adaprelora/projection.hpp"
#include "adaprelora/random_matrices.hpp"
#include "adaprelora/solver.hpp"

namespace adaprelora {

FactorPair random_full_rank_pair(std::uint64_t seed, Eigen::Index max_dim, Eigen::Index max_rank) {
  Xoshiro256pp rng(derive_seed(seed, 0xFAC));
  const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.next() % (max_dim - 1));
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next() % (max_dim - 1));
  const Eigen::Index rmax = std::min(max_rank, std::min(m, n));
  const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.next() % rmax);
  return FactorPair(full_rank_matrix(rng, m, r), full_rank_matrix(rng, r, n));
}

DiagWeights random_weights(std::uint64_t seed, Eigen::Index m, Eigen::Index n) {
  Xoshiro256pp rng(derive_seed(seed, 0x3e1));
  const double lo = std::log(0.1), hi = std::log(10.0);
  Eigen::VectorXd lhalf(m), rhalf(n);
  for (Eigen::Index i = 0; i < m; ++i) lhalf(i) = std::exp(rng.uniform(lo, hi));
  for (Eigen::Index j = 0; j < n; ++j) rhalf(j) = std::exp(rng.uniform(lo, hi));
  return DiagWeights::from_half_diagonals(std::move(lhalf), std::move(rhalf));
}

TestInstance random_test_instance(std::uint64_t seed, Eigen::Index max_dim,
                                  Eigen::Index max_rank) {
  FactorPair fp = random_full_rank_pair(seed, max_dim, max_rank);
  DiagWeights w = random_weights(seed, fp.m(), fp.n());
  Xoshiro256pp rng(derive_seed(seed, 0x9d));
  Eigen::MatrixXd G = gaussian_matrix(rng, fp.m(), fp.n());
  return {std::move(fp), std::move(w), std::move(G)};
}

namespace {

constexpr double kTightEps = 1e-12;  // solver eps for near-exact identities

double rel(double gap, double scale) { return gap / (1.0 + scale); }

FactorDirection random_direction(Xoshiro256pp& rng, const FactorPair& fp) {
  return {gaussian_matrix(rng, fp.m(), fp.r()), gaussian_matrix(rng, fp.r(), fp.n())};
}

Eigen::MatrixXd kernel_basis_matrix(const FactorPair& fp) {
  const Eigen::Index r = fp.r();
  Eigen::MatrixXd K((fp.m() + fp.n()) * r, r * r);
  Eigen::Index col = 0;
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index i = 0; i < r; ++i, ++col) {
      Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(r, r);
      basis(i, j) = 1.0;
      K.col(col) = vectorize_direction(kernel_direction(fp, basis));
    }
  }
  return K;
}

Eigen::Index expected_jacobian_rank(const FactorPair& fp) {
  return (fp.m() + fp.n()) * fp.r() - fp.r() * fp.r();
}

double max_factor_gap(const FactorPair& a, const FactorPair& b) {
  return std::max((a.B - b.B).norm() / (1.0 + b.B.norm()),
                  (a.A - b.A).norm() / (1.0 + b.A.norm()));
}

// ---- property implementations -------------------------------------------

double prop_adjoint_pairing(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  Xoshiro256pp rng(derive_seed(seed, 0xad));
  const FactorDirection d = random_direction(rng, fp);
  const Eigen::MatrixXd C = gaussian_matrix(rng, fp.m(), fp.n());
  const double lhs = apply_jacobian(fp, d).cwiseProduct(C).sum();
  const double rhs = direction_inner(d, apply_adjoint(fp, C));
  return std::abs(lhs - rhs) / (1.0 + std::abs(lhs));
}

double prop_kernel_annihilation(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  Xoshiro256pp rng(derive_seed(seed, 0x4e));
  const Eigen::MatrixXd X = gaussian_matrix(rng, fp.r(), fp.r());
  const double image = apply_jacobian(fp, kernel_direction(fp, X)).norm();
  const double scale = fp.B.norm() * X.norm() * fp.A.norm();
  return image / std::max(scale, 1e-30);
}

double prop_rank_deficiency(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  const Eigen::MatrixXd J = vectorized_jacobian(fp);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = 1e-8 * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > cutoff) ++rank;
  return std::abs(static_cast<double>(rank - expected_jacobian_rank(fp)));
}

double prop_kernel_completeness(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  const Eigen::MatrixXd J = vectorized_jacobian(fp);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = 1e-8 * sv(0);
  const Eigen::MatrixXd K = kernel_basis_matrix(fp);
  const auto solver = K.colPivHouseholderQr();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < svd.matrixV().cols(); ++i) {
    if (i < sv.size() && sv(i) > cutoff) continue;  // not a null direction
    const Eigen::VectorXd v = svd.matrixV().col(i);
    const Eigen::VectorXd coeff = solver.solve(v);
    worst = std::max(worst, (K * coeff - v).norm());
  }
  return worst;
}

double prop_gram_w_composition(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  Xoshiro256pp rng(derive_seed(seed, 0x6c));
  const Eigen::MatrixXd C = gaussian_matrix(rng, fp.m(), fp.n());
  const Eigen::MatrixXd direct = jacobian_gram_w(fp, C);
  const Eigen::MatrixXd composed = apply_jacobian(fp, apply_adjoint(fp, C));
  return rel((direct - composed).norm(), direct.norm());
}

double prop_gram_factor_composition(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  Xoshiro256pp rng(derive_seed(seed, 0x6d));
  const FactorDirection d = random_direction(rng, fp);
  const FactorDirection direct = jacobian_gram_factor(fp, d);
  const FactorDirection composed = apply_adjoint(fp, apply_jacobian(fp, d));
  return rel((direct - composed).norm(), direct.norm());
}

double prop_vectorized_matvec(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  Xoshiro256pp rng(derive_seed(seed, 0x33));
  const FactorDirection d = random_direction(rng, fp);
  const Eigen::MatrixXd J = vectorized_jacobian(fp);
  const Eigen::VectorXd via_matrix = J * vectorize_direction(d);
  const Eigen::VectorXd via_op = vectorize(apply_jacobian(fp, d));
  return rel((via_matrix - via_op).norm(), via_op.norm());
}

double prop_weights_strictly_positive(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0x77));
  const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.next() % 7);
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next() % 7);
  AdafactorState state = AdafactorState::fresh(m, n);
  if (seed % 3 != 0) {
    Eigen::MatrixXd G = gaussian_matrix(rng, m, n);
    G.row(0).setZero();  // plant a dead row so the floor has to fire
    state = update_stats(state, G);
  }
  const DiagWeights w = build_weights(state);
  const bool positive = (w.l_half.array() > 0.0).all() && (w.r_half.array() > 0.0).all();
  const double recip_gap =
      std::max((w.l_half.cwiseProduct(w.l_neg_half).array() - 1.0).abs().maxCoeff(),
               (w.r_half.cwiseProduct(w.r_neg_half).array() - 1.0).abs().maxCoeff());
  return positive && recip_gap <= 1e-14 ? 0.0 : 1.0;
}

double prop_h_roundtrip(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  Xoshiro256pp rng(derive_seed(seed, 0x88));
  const Eigen::MatrixXd K = gaussian_matrix(rng, inst.fp.m(), inst.fp.n());
  const Eigen::MatrixXd round = apply_h(inst.w, apply_h_inv(inst.w, K));
  return rel((round - K).norm(), K.norm());
}

double prop_inner_product_axioms(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  Xoshiro256pp rng(derive_seed(seed, 0x99));
  const Eigen::Index m = inst.fp.m(), n = inst.fp.n();
  const Eigen::MatrixXd Y = gaussian_matrix(rng, m, n);
  const Eigen::MatrixXd Z = gaussian_matrix(rng, m, n);
  const Eigen::MatrixXd U = gaussian_matrix(rng, m, n);
  const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);

  const double lin = weighted_inner(inst.w, a * Y + b * U, Z);
  const double lin_expected =
      a * weighted_inner(inst.w, Y, Z) + b * weighted_inner(inst.w, U, Z);
  double dev = std::abs(lin - lin_expected) / (1.0 + std::abs(lin_expected));

  const double sym =
      std::abs(weighted_inner(inst.w, Y, Z) - weighted_inner(inst.w, Z, Y));
  dev = std::max(dev, sym / (1.0 + std::abs(weighted_inner(inst.w, Y, Z))));

  if (!(weighted_inner(inst.w, Y, Y) > 0.0)) dev = std::max(dev, 1.0);
  return dev;
}

double prop_state_memory(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0xaa));
  const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.next() % 30);
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next() % 30);
  const AdafactorState state = AdafactorState::fresh(m, n);
  return std::abs(static_cast<double>(state.statistic_scalar_count() - (m + n)));
}

double prop_idempotent(std::uint64_t seed, bool weighted) {
  const TestInstance inst = random_test_instance(seed);
  Xoshiro256pp rng(derive_seed(seed, 0xbb));
  const Eigen::MatrixXd Z = gaussian_matrix(rng, inst.fp.m(), inst.fp.n());
  const Eigen::MatrixXd p =
      weighted ? project_weighted(inst.fp, inst.w, Z) : project_standard(inst.fp, Z);
  const Eigen::MatrixXd pp =
      weighted ? project_weighted(inst.fp, inst.w, p) : project_standard(inst.fp, p);
  return rel((pp - p).norm(), Z.norm());
}

double prop_self_adjoint(std::uint64_t seed, bool weighted) {
  const TestInstance inst = random_test_instance(seed);
  Xoshiro256pp rng(derive_seed(seed, 0xcc));
  Eigen::MatrixXd Y = gaussian_matrix(rng, inst.fp.m(), inst.fp.n());
  Eigen::MatrixXd Z = gaussian_matrix(rng, inst.fp.m(), inst.fp.n());
  Y /= Y.norm();
  Z /= Z.norm();
  if (weighted) {
    const double lhs = weighted_inner(inst.w, project_weighted(inst.fp, inst.w, Y), Z);
    const double rhs = weighted_inner(inst.w, Y, project_weighted(inst.fp, inst.w, Z));
    return std::abs(lhs - rhs);
  }
  const double lhs = project_standard(inst.fp, Y).cwiseProduct(Z).sum();
  const double rhs = Y.cwiseProduct(project_standard(inst.fp, Z)).sum();
  return std::abs(lhs - rhs);
}

double prop_residual_orthogonal(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  Xoshiro256pp rng(derive_seed(seed, 0xdd));
  const Eigen::MatrixXd Z = gaussian_matrix(rng, inst.fp.m(), inst.fp.n());
  const Eigen::MatrixXd resid = Z - project_weighted(inst.fp, inst.w, Z);
  const double resid_norm = weighted_norm(inst.w, resid);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    Eigen::MatrixXd T = apply_jacobian(inst.fp, random_direction(rng, inst.fp));
    const double tn = weighted_norm(inst.w, T);
    if (tn < 1e-14) continue;
    T /= tn;
    worst = std::max(worst, std::abs(weighted_inner(inst.w, resid, T)));
  }
  return worst / (1.0 + resid_norm);
}

double prop_range_membership(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  Xoshiro256pp rng(derive_seed(seed, 0xde));
  const Eigen::MatrixXd Z = gaussian_matrix(rng, inst.fp.m(), inst.fp.n());
  const Eigen::MatrixXd p = project_weighted(inst.fp, inst.w, Z);
  const Eigen::MatrixXd J = vectorized_jacobian(inst.fp);
  const Eigen::VectorXd target = vectorize(p);
  const Eigen::VectorXd coeff = J.colPivHouseholderQr().solve(target);
  return rel((J * coeff - target).norm(), target.norm());
}

double prop_best_approximation(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  Xoshiro256pp rng(derive_seed(seed, 0xdf));
  const Eigen::MatrixXd Z = gaussian_matrix(rng, inst.fp.m(), inst.fp.n());
  const double projected_distance =
      weighted_norm(inst.w, Z - project_weighted(inst.fp, inst.w, Z));
  double dev = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Eigen::MatrixXd T = apply_jacobian(inst.fp, random_direction(rng, inst.fp));
    dev = std::max(dev, projected_distance - weighted_norm(inst.w, Z - T));
  }
  return std::max(0.0, dev);
}

double prop_identity_degeneration(std::uint64_t seed) {
  const FactorPair fp = random_full_rank_pair(seed);
  Xoshiro256pp rng(derive_seed(seed, 0xe0));
  const Eigen::MatrixXd Z = gaussian_matrix(rng, fp.m(), fp.n());
  const DiagWeights id = DiagWeights::identity(fp.m(), fp.n());
  return rel((project_weighted(fp, id, Z) - project_standard(fp, Z)).norm(), Z.norm());
}

double prop_projection_identity(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const GradientBundle gb(inst.fp, inst.G);
  const UpdateDelta delta = closed_form_update(inst.fp, inst.w, gb, kTightEps);
  const Eigen::MatrixXd target =
      project_weighted(inst.fp, inst.w, apply_h_inv(inst.w, inst.G));
  return rel((delta.induced_w - target).norm(), inst.G.norm());
}

double prop_gauge_invariance(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const GradientBundle gb(inst.fp, inst.G);
  Xoshiro256pp rng(derive_seed(seed, 0xe2));
  const UpdateDelta base =
      family_solution(inst.fp, inst.w, gb, {Eigen::MatrixXd::Zero(inst.fp.r(), inst.fp.r())},
                      kTightEps);
  double dev = 0.0;
  for (int k = 0; k < 20; ++k) {
    const GaugeParameter x{gaussian_matrix(rng, inst.fp.r(), inst.fp.r())};
    const UpdateDelta member = family_solution(inst.fp, inst.w, gb, x, kTightEps);
    dev = std::max(dev, rel((member.induced_w - base.induced_w).norm(), base.induced_w.norm()));
  }
  return dev;
}

double prop_closed_form_is_family_at_opt(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const GradientBundle gb(inst.fp, inst.G);
  const GaugeParameter x = optimal_gauge(inst.fp, inst.w, gb, kTightEps);
  const UpdateDelta fam = family_solution(inst.fp, inst.w, gb, x, kTightEps);
  const UpdateDelta cf = closed_form_update(inst.fp, inst.w, gb, kTightEps);
  return std::max(rel((fam.dB - cf.dB).norm(), cf.dB.norm()),
                  rel((fam.dA - cf.dA).norm(), cf.dA.norm()));
}

double prop_balance_stationarity(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const GradientBundle gb(inst.fp, inst.G);
  const GaugeParameter x = optimal_gauge(inst.fp, inst.w, gb, kTightEps);
  const auto objective = [&](const Eigen::MatrixXd& X) {
    return imbalance(inst.fp, inst.w, family_solution(inst.fp, inst.w, gb, {X}, kTightEps));
  };
  const double psi = objective(x.X);
  const Eigen::MatrixXd grad = finite_diff_gradient(objective, x.X, 1e-5);
  return grad.norm() / (1.0 + psi);
}

double prop_balance_local_optimality(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const GradientBundle gb(inst.fp, inst.G);
  Xoshiro256pp rng(derive_seed(seed, 0xe5));
  const GaugeParameter x = optimal_gauge(inst.fp, inst.w, gb, kTightEps);
  const double psi_opt =
      imbalance(inst.fp, inst.w, family_solution(inst.fp, inst.w, gb, x, kTightEps));
  double dev = 0.0;
  for (int k = 0; k < 50; ++k) {
    Eigen::MatrixXd delta = gaussian_matrix(rng, inst.fp.r(), inst.fp.r());
    delta *= 1e-2 / delta.norm();
    const double psi = imbalance(
        inst.fp, inst.w, family_solution(inst.fp, inst.w, gb, {x.X + delta}, kTightEps));
    dev = std::max(dev, psi_opt - psi);
  }
  return std::max(0.0, dev);
}

double prop_balance_beats_random_gauges(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const GradientBundle gb(inst.fp, inst.G);
  Xoshiro256pp rng(derive_seed(seed, 0xe6));
  const double psi_closed =
      imbalance(inst.fp, inst.w, closed_form_update(inst.fp, inst.w, gb, kTightEps));
  double dev = 0.0;
  for (int k = 0; k < 20; ++k) {
    const GaugeParameter x{gaussian_matrix(rng, inst.fp.r(), inst.fp.r())};
    const double psi =
        imbalance(inst.fp, inst.w, family_solution(inst.fp, inst.w, gb, x, kTightEps));
    dev = std::max(dev, psi_closed - psi);
  }
  return std::max(0.0, dev);
}

double prop_normal_equation_residual(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const GradientBundle gb(inst.fp, inst.G);
  const UpdateDelta delta = closed_form_update(inst.fp, inst.w, gb, kTightEps);
  const FactorDirection resid = apply_adjoint(
      inst.fp, apply_h(inst.w, delta.induced_w - apply_h_inv(inst.w, inst.G)));
  return resid.norm() / (1.0 + inst.G.norm());
}

double oracle_gap(const TestInstance& inst) {
  const GradientBundle gb(inst.fp, inst.G);
  const UpdateDelta cf = closed_form_update(inst.fp, inst.w, gb, kTightEps);
  const BruteForceUpdate bf = brute_force_update(inst.fp, inst.w, inst.G);
  const double rel_b = (cf.dB - bf.balanced.dB).norm() / std::max(bf.balanced.dB.norm(), 1e-12);
  const double rel_a = (cf.dA - bf.balanced.dA).norm() / std::max(bf.balanced.dA.norm(), 1e-12);
  return std::max(rel_b, rel_a);
}

double prop_oracle_equivalence(std::uint64_t seed) {
  return oracle_gap(random_test_instance(seed));
}

double prop_identity_weights_match_oracle(std::uint64_t seed) {
  TestInstance inst = random_test_instance(seed);
  inst.w = DiagWeights::identity(inst.fp.m(), inst.fp.n());
  return oracle_gap(inst);
}

double prop_pinv_normal_equation(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const BruteForceUpdate bf = brute_force_update(inst.fp, inst.w, inst.G);
  const Eigen::MatrixXd J = vectorized_jacobian(inst.fp);
  Eigen::VectorXd dvec(inst.fp.m() * inst.fp.n());
  for (Eigen::Index j = 0; j < inst.fp.n(); ++j)
    for (Eigen::Index i = 0; i < inst.fp.m(); ++i)
      dvec(i + j * inst.fp.m()) = inst.w.l_half(i) * inst.w.r_half(j);
  const Eigen::VectorXd scale = dvec.cwiseSqrt();
  const Eigen::MatrixXd Jw = scale.asDiagonal() * J;
  const Eigen::VectorXd rhs = scale.cwiseProduct(vectorize(apply_h_inv(inst.w, inst.G)));
  const Eigen::VectorXd d = vectorize_direction({bf.min_norm.dB, bf.min_norm.dA});
  const Eigen::VectorXd normal_resid = Jw.transpose() * (Jw * d - rhs);
  return rel(normal_resid.norm(), (Jw.transpose() * rhs).norm());
}

double prop_kernel_shift_residual_invariance(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const BruteForceUpdate bf = brute_force_update(inst.fp, inst.w, inst.G);
  Xoshiro256pp rng(derive_seed(seed, 0xf1));
  const Eigen::MatrixXd J = vectorized_jacobian(inst.fp);
  Eigen::VectorXd dvec(inst.fp.m() * inst.fp.n());
  for (Eigen::Index j = 0; j < inst.fp.n(); ++j)
    for (Eigen::Index i = 0; i < inst.fp.m(); ++i)
      dvec(i + j * inst.fp.m()) = inst.w.l_half(i) * inst.w.r_half(j);
  const Eigen::VectorXd scale = dvec.cwiseSqrt();
  const Eigen::MatrixXd Jw = scale.asDiagonal() * J;
  const Eigen::VectorXd rhs = scale.cwiseProduct(vectorize(apply_h_inv(inst.w, inst.G)));
  const Eigen::VectorXd d = vectorize_direction({bf.min_norm.dB, bf.min_norm.dA});
  const Eigen::VectorXd shifted =
      d + vectorize_direction(kernel_direction(inst.fp, gaussian_matrix(rng, inst.fp.r(),
                                                                        inst.fp.r())));
  const double base = (Jw * d - rhs).norm();
  const double moved = (Jw * shifted - rhs).norm();
  return std::abs(moved - base) / (1.0 + rhs.norm());
}

double prop_oracle_identity_projection(std::uint64_t seed) {
  TestInstance inst = random_test_instance(seed);
  inst.w = DiagWeights::identity(inst.fp.m(), inst.fp.n());
  const BruteForceUpdate bf = brute_force_update(inst.fp, inst.w, inst.G);
  const Eigen::MatrixXd target = project_standard(inst.fp, inst.G);
  return rel((bf.min_norm.induced_w - target).norm(), target.norm());
}

double prop_minnorm_balance_same_image(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const BruteForceUpdate bf = brute_force_update(inst.fp, inst.w, inst.G);
  return rel((bf.balanced.induced_w - bf.min_norm.induced_w).norm(),
             bf.min_norm.induced_w.norm());
}

double prop_fd_gradient_quadratic(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0xf4));
  const Eigen::MatrixXd X = gaussian_matrix(rng, 3, 4);
  const auto f = [](const Eigen::MatrixXd& M) { return 0.5 * M.squaredNorm(); };
  const Eigen::MatrixXd grad = finite_diff_gradient(f, X);
  return rel((grad - X).norm(), X.norm());
}

double prop_init_factors(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0xf5));
  const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.next() % 7);
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next() % 7);
  const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.next() % std::min<Eigen::Index>(
                                                                        3, std::min(m, n)));
  const FactorPair a = init_factors(m, n, r, seed);
  const FactorPair b = init_factors(m, n, r, seed);
  const FactorPair c = init_factors(m, n, r, seed + 1);
  const double bound = 1.0 / std::sqrt(static_cast<double>(n));
  const bool ok = a.B.isZero(0.0) && (a.A.array().abs() <= bound).all() &&
                  a.A.cwiseEqual(b.A).all() && !a.A.cwiseEqual(c.A).all();
  return ok ? 0.0 : 1.0;
}

double prop_chain_rule_fd(std::uint64_t seed) {
  const ProblemInstance problem =
      make_problem(ProblemKind::recovery, 5, 4, 2, 10.0, derive_seed(seed, 0xf6));
  Xoshiro256pp rng(derive_seed(seed, 0xf7));
  const Eigen::MatrixXd B = gaussian_matrix(rng, 5, 2);
  const Eigen::MatrixXd A = gaussian_matrix(rng, 2, 4);
  const FactorPair fp(B, A);
  const auto [loss, G] = loss_and_gradient(problem, fp);
  (void)loss;
  const GradientBundle gb(fp, G);

  const auto loss_of_b = [&](const Eigen::MatrixXd& Bm) {
    return loss_and_gradient(problem, FactorPair(Bm, A)).first;
  };
  const auto loss_of_a = [&](const Eigen::MatrixXd& Am) {
    return loss_and_gradient(problem, FactorPair(B, Am)).first;
  };
  const double dev_b =
      (finite_diff_gradient(loss_of_b, B) - gb.G_B).norm() / (1.0 + gb.G_B.norm());
  const double dev_a =
      (finite_diff_gradient(loss_of_a, A) - gb.G_A).norm() / (1.0 + gb.G_A.norm());
  return std::max(dev_b, dev_a);
}

double prop_momentum_matches_sgd(std::uint64_t seed) {
  const TestInstance inst = random_test_instance(seed);
  const Eigen::Index m = inst.fp.m(), n = inst.fp.n(), r = inst.fp.r();
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.decay_row = 0.0;
  cfg.decay_col = 0.0;
  cfg.momentum_decay = 0.0;
  cfg.weight_decay = 0.0;

  const AdafactorState state = AdafactorState::fresh(m, n, 0.0, 0.0, cfg.eps);
  const auto [sgd_fp, sgd_state] = step_adaprelora_sgd(inst.fp, state, inst.G, cfg);
  (void)sgd_state;

  double dev = 0.0;
  for (MomentumMode mode : {MomentumMode::w_space, MomentumMode::factor_space}) {
    cfg.momentum_mode = mode;
    const MomentumState mstate = MomentumState::fresh(mode, m, n, r);
    const auto [mom_fp, mom_state, mom_m] =
        step_adaprelora_momentum(inst.fp, state, mstate, inst.G, cfg);
    (void)mom_state;
    (void)mom_m;
    dev = std::max(dev, max_factor_gap(mom_fp, sgd_fp));
  }
  return dev;
}

double prop_identity_coincidence(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0xf9));
  const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next() % 7);
  const Eigen::Index m = n;  // square so uniform-magnitude gradients force L = R = I
  const Eigen::Index r =
      1 + static_cast<Eigen::Index>(rng.next() % std::min<Eigen::Index>(3, n));
  const FactorPair fp(full_rank_matrix(rng, m, r), full_rank_matrix(rng, r, n));
  Eigen::MatrixXd G(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) G(i, j) = (rng.next() & 1) ? 1.0 : -1.0;

  OptimizerConfig cfg;
  cfg.learning_rate = 0.25;
  cfg.decay_row = 0.0;
  cfg.decay_col = 0.0;

  const AdafactorState state = AdafactorState::fresh(m, n, 0.0, 0.0, cfg.eps);
  const auto [ada_fp, ada_state] = step_adaprelora_sgd(fp, state, G, cfg);
  (void)ada_state;
  const FactorPair id_fp = step_identity_projected(fp, G, cfg);
  return max_factor_gap(ada_fp, id_fp);
}

double prop_state_scalar_accounting(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0xfa));
  const Eigen::Index m = 3 + static_cast<Eigen::Index>(rng.next() % 10);
  const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.next() % 10);
  const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng.next() % 3);
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;

  double dev = 0.0;
  {
    OptimizerSession s(OptimizerKind::adaprelora_sgd, m, n, r, cfg, seed);
    dev = std::max(dev, std::abs(static_cast<double>(s.state_scalar_count() - (m + n))));
  }
  {
    cfg.momentum_mode = MomentumMode::factor_space;
    OptimizerSession s(OptimizerKind::adaprelora_momentum, m, n, r, cfg, seed);
    dev = std::max(dev,
                   std::abs(static_cast<double>(s.state_scalar_count() - (m + n + (m + n) * r))));
  }
  {
    cfg.momentum_mode = MomentumMode::w_space;
    OptimizerSession s(OptimizerKind::adaprelora_momentum, m, n, r, cfg, seed);
    dev = std::max(dev,
                   std::abs(static_cast<double>(s.state_scalar_count() - (m + n + m * n))));
  }
  {
    cfg.momentum_mode = MomentumMode::none;
    OptimizerSession s(OptimizerKind::factor_sgd, m, n, r, cfg, seed);
    dev = std::max(dev, std::abs(static_cast<double>(s.state_scalar_count())));
  }
  return dev;
}

double prop_trajectory_determinism(std::uint64_t seed) {
  const ProblemInstance problem =
      make_problem(ProblemKind::recovery, 6, 5, 2, 10.0, derive_seed(seed, 0xfb));
  OptimizerConfig cfg;
  cfg.learning_rate = 0.05;
  OptimizerSession a(OptimizerKind::adaprelora_sgd, 6, 5, 2, cfg, seed);
  OptimizerSession b(OptimizerKind::adaprelora_sgd, 6, 5, 2, cfg, seed);
  double dev = 0.0;
  for (int k = 0; k < 30; ++k) {
    const auto [loss_a, grad_a] = loss_and_gradient(problem, a.factors());
    const auto [loss_b, grad_b] = loss_and_gradient(problem, b.factors());
    if (loss_a != loss_b) dev = std::max(dev, 1.0);
    a.step(grad_a);
    b.step(grad_b);
    if (!a.factors().B.cwiseEqual(b.factors().B).all() ||
        !a.factors().A.cwiseEqual(b.factors().A).all())
      dev = std::max(dev, 1.0);
  }
  return dev;
}

double prop_descent_sanity(std::uint64_t seed) {
  const ProblemInstance problem =
      make_problem(ProblemKind::recovery, 8, 8, 2, 10.0, derive_seed(seed, 0xfc));
  double dev = 0.0;
  for (OptimizerKind kind :
       {OptimizerKind::adaprelora_sgd, OptimizerKind::adaprelora_momentum,
        OptimizerKind::factor_sgd, OptimizerKind::scaled_gd, OptimizerKind::identity_projected}) {
    OptimizerConfig cfg;
    cfg.learning_rate = kind == OptimizerKind::adaprelora_momentum ? 1e-4 : 1e-3;
    cfg.momentum_mode = MomentumMode::w_space;
    OptimizerSession session(kind, 8, 8, 2, cfg, seed);
    for (int k = 0; k < 100; ++k) {
      const auto [loss, grad] = loss_and_gradient(problem, session.factors());
      session.step(grad);
      const double next = loss_and_gradient(problem, session.factors()).first;
      dev = std::max(dev, (next - loss) / (1.0 + loss));
    }
  }
  return std::max(0.0, dev);
}

double prop_problem_gradient_exactness(std::uint64_t seed) {
  double dev = 0.0;
  for (ProblemKind kind : {ProblemKind::recovery, ProblemKind::sensing}) {
    const ProblemInstance problem = make_problem(kind, 4, 4, 1, 5.0, derive_seed(seed, 0xfd));
    Xoshiro256pp rng(derive_seed(seed, 0xfe));
    const Eigen::MatrixXd B = gaussian_matrix(rng, 4, 2);
    const Eigen::MatrixXd A = gaussian_matrix(rng, 2, 4);
    const FactorPair fp(B, A);
    const auto [loss, G] = loss_and_gradient(problem, fp);
    (void)loss;
    const GradientBundle gb(fp, G);
    const auto loss_of_b = [&](const Eigen::MatrixXd& Bm) {
      return loss_and_gradient(problem, FactorPair(Bm, A)).first;
    };
    const auto loss_of_a = [&](const Eigen::MatrixXd& Am) {
      return loss_and_gradient(problem, FactorPair(B, Am)).first;
    };
    dev = std::max(dev, (finite_diff_gradient(loss_of_b, B) - gb.G_B).norm() /
                            (1.0 + gb.G_B.norm()));
    dev = std::max(dev, (finite_diff_gradient(loss_of_a, A) - gb.G_A).norm() /
                            (1.0 + gb.G_A.norm()));
  }
  return dev;
}

double prop_zero_loss_certificate(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0x101));
  const Eigen::Index m = 4 + static_cast<Eigen::Index>(rng.next() % 5);
  const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.next() % 5);
  const Eigen::Index k = 1 + static_cast<Eigen::Index>(rng.next() % 3);
  const ProblemInstance problem = make_problem(ProblemKind::recovery, m, n, k, 25.0, seed);
  const Eigen::MatrixXd residual = problem.target - problem.W0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(residual, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd root = svd.singularValues().head(k).cwiseSqrt();
  const FactorPair best(svd.matrixU().leftCols(k) * root.asDiagonal(),
                        root.asDiagonal() * svd.matrixV().leftCols(k).transpose());
  const double loss = loss_and_gradient(problem, best).first;
  return loss / (1.0 + residual.squaredNorm());
}

double prop_spectrum_matches_kappa(std::uint64_t seed) {
  Xoshiro256pp rng(derive_seed(seed, 0x102));
  const Eigen::Index m = 4 + static_cast<Eigen::Index>(rng.next() % 5);
  const Eigen::Index n = 4 + static_cast<Eigen::Index>(rng.next() % 5);
  const Eigen::Index k = 2 + static_cast<Eigen::Index>(rng.next() % 2);
  const double kappa = rng.uniform(1.0, 100.0);
  const ProblemInstance problem = make_problem(ProblemKind::recovery, m, n, k, kappa, seed);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(problem.target - problem.W0);
  const Eigen::VectorXd& sv = svd.singularValues();
  double dev = std::abs(sv(0) / sv(k - 1) - kappa) / kappa;
  if (sv.size() > k) dev = std::max(dev, sv(k) / sv(0));  // planted rank must be exact
  return dev;
}

double prop_instance_determinism(std::uint64_t seed) {
  const ProblemInstance a = make_problem(ProblemKind::sensing, 4, 5, 2, 10.0, seed);
  const ProblemInstance b = make_problem(ProblemKind::sensing, 4, 5, 2, 10.0, seed);
  double dev = 0.0;
  if (!a.W0.cwiseEqual(b.W0).all() || !a.target.cwiseEqual(b.target).all()) dev = 1.0;
  if (!a.observations.cwiseEqual(b.observations).all()) dev = 1.0;
  return dev;
}

struct Property {
  const char* name;
  double tolerance;
  double (*deviation)(std::uint64_t seed);
};

const Property kProperties[] = {
    {"generator.adjoint_pairing", 1e-10, prop_adjoint_pairing},
    {"generator.kernel_annihilation", 1e-12, prop_kernel_annihilation},
    {"generator.rank_deficiency", 0.5, prop_rank_deficiency},
    {"generator.kernel_completeness", 1e-8, prop_kernel_completeness},
    {"generator.gram_w_matches_composition", 1e-12, prop_gram_w_composition},
    {"generator.gram_factor_matches_composition", 1e-12, prop_gram_factor_composition},
    {"generator.vectorized_matvec_agreement", 1e-12, prop_vectorized_matvec},
    {"adafactor.weights_strictly_positive", 0.5, prop_weights_strictly_positive},
    {"adafactor.h_inverse_roundtrip", 1e-13, prop_h_roundtrip},
    {"adafactor.inner_product_axioms", 1e-12, prop_inner_product_axioms},
    {"adafactor.state_memory_m_plus_n", 0.5, prop_state_memory},
    {"projection.standard_idempotent", 1e-10,
     [](std::uint64_t s) { return prop_idempotent(s, false); }},
    {"projection.weighted_idempotent", 1e-10,
     [](std::uint64_t s) { return prop_idempotent(s, true); }},
    {"projection.standard_self_adjoint", 1e-10,
     [](std::uint64_t s) { return prop_self_adjoint(s, false); }},
    {"projection.weighted_self_adjoint", 1e-10,
     [](std::uint64_t s) { return prop_self_adjoint(s, true); }},
    {"projection.residual_h_orthogonal", 1e-10, prop_residual_orthogonal},
    {"projection.range_membership", 1e-8, prop_range_membership},
    {"projection.best_approximation", 1e-10, prop_best_approximation},
    {"projection.identity_weight_degeneration", 1e-13, prop_identity_degeneration},
    {"solver.projection_identity", 1e-9, prop_projection_identity},
    {"solver.gauge_invariance", 1e-9, prop_gauge_invariance},
    {"solver.closed_form_is_family_at_optimal_gauge", 1e-11, prop_closed_form_is_family_at_opt},
    {"solver.balance_stationarity", 1e-5, prop_balance_stationarity},
    {"solver.balance_local_optimality", 1e-14, prop_balance_local_optimality},
    {"solver.balance_beats_random_gauges", 1e-14, prop_balance_beats_random_gauges},
    {"solver.normal_equation_residual", 1e-8, prop_normal_equation_residual},
    {"solver.oracle_equivalence", 1e-8, prop_oracle_equivalence},
    {"solver.identity_weights_match_frobenius_balance", 1e-8,
     prop_identity_weights_match_oracle},
    {"oracle.pinv_normal_equation", 1e-9, prop_pinv_normal_equation},
    {"oracle.kernel_shift_residual_invariance", 1e-10, prop_kernel_shift_residual_invariance},
    {"oracle.identity_weight_projection", 1e-9, prop_oracle_identity_projection},
    {"oracle.minnorm_balance_common_image", 1e-10, prop_minnorm_balance_same_image},
    {"oracle.fd_gradient_quadratic", 1e-6, prop_fd_gradient_quadratic},
    {"optim.init_factor_contract", 0.5, prop_init_factors},
    {"optim.chain_rule_finite_difference", 1e-6, prop_chain_rule_fd},
    {"optim.momentum_reduces_to_sgd", 1e-13, prop_momentum_matches_sgd},
    {"optim.identity_weight_coincidence", 1e-12, prop_identity_coincidence},
    {"optim.state_scalar_accounting", 0.5, prop_state_scalar_accounting},
    {"optim.trajectory_determinism", 0.0, prop_trajectory_determinism},
    {"optim.descent_sanity", 1e-12, prop_descent_sanity},
    {"problems.gradient_exactness_fd", 1e-6, prop_problem_gradient_exactness},
    {"problems.zero_loss_certificate", 1e-18, prop_zero_loss_certificate},
    {"problems.spectrum_matches_kappa", 1e-10, prop_spectrum_matches_kappa},
    {"problems.instance_determinism", 0.0, prop_instance_determinism},
};

}  // namespace

std::vector<PropertyResult> run_verification(VerifyIntensity intensity) {
  const int trials = intensity == VerifyIntensity::quick ? 20 : 200;
  std::vector<PropertyResult> results;
  results.reserve(std::size(kProperties));
  for (const Property& property : kProperties) {
    PropertyResult result;
    result.name = property.name;
    result.tolerance = property.tolerance;
    result.trials = trials;
    for (int t = 0; t < trials; ++t) {
      const double dev = property.deviation(static_cast<std::uint64_t>(t));
      if (dev > result.max_deviation) {
        result.max_deviation = dev;
        result.worst_seed = static_cast<std::uint64_t>(t);
      }
    }
    result.pass = result.max_deviation <= result.tolerance;
    results.push_back(std::move(result));
  }
  return results;
}

std::string format_property_result(const PropertyResult& result) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "[%s] %-48s max_dev=%-12.3e tol=%-9.0e seed=%llu trials=%d",
                result.pass ? "PASS" : "FAIL", result.name.c_str(), result.max_deviation,
                result.tolerance, static_cast<unsigned long long>(result.worst_seed),
                result.trials);
  return buf;
}

}  // namespace adaprelora
