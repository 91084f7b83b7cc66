// Acceptance suite: runs every release criterion at its pinned tolerance and
// prints one pass/fail line per criterion. Exits nonzero if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "adaprelora.h"
#include "adaprelora/harness.hpp"
#include "adaprelora/oracle.hpp"
#include "adaprelora/optimizers.hpp"
#include "adaprelora/problems.hpp"
#include "adaprelora/projection.hpp"
#include "adaprelora/random_matrices.hpp"
#include "adaprelora/rng.hpp"
#include "adaprelora/solver.hpp"
#include "adaprelora/verify.hpp"

using namespace adaprelora;
namespace fs = std::filesystem;

namespace {

constexpr int kInstanceCount = 200;
constexpr double kTightEps = 1e-12;

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %-28s %s\n", pass ? "PASS" : "FAIL", id, name,
              detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* format, ...) {
  char buf[256];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// ---- criteria 1 & 2: oracle equivalence and the projection identity ------

void criterion_oracle_and_projection() {
  const auto start = std::chrono::steady_clock::now();
  double max_oracle_dev = 0.0;
  double max_proj_dev = 0.0;
  for (int t = 0; t < kInstanceCount; ++t) {
    const TestInstance inst = random_test_instance(static_cast<std::uint64_t>(t));
    const GradientBundle gb(inst.fp, inst.G);
    const UpdateDelta cf = closed_form_update(inst.fp, inst.w, gb, kTightEps);

    const BruteForceUpdate bf = brute_force_update(inst.fp, inst.w, inst.G);
    const double dev_b =
        (cf.dB - bf.balanced.dB).norm() / std::max(bf.balanced.dB.norm(), 1e-12);
    const double dev_a =
        (cf.dA - bf.balanced.dA).norm() / std::max(bf.balanced.dA.norm(), 1e-12);
    max_oracle_dev = std::max({max_oracle_dev, dev_b, dev_a});

    const Eigen::MatrixXd target =
        project_weighted(inst.fp, inst.w, apply_h_inv(inst.w, inst.G));
    max_proj_dev = std::max(max_proj_dev,
                            (cf.induced_w - target).norm() / (1.0 + inst.G.norm()));
  }
  const double elapsed = seconds_since(start);
  report(1, "oracle equivalence",
         max_oracle_dev <= 1e-8 && elapsed <= 30.0,
         fmt("max rel dev %.2e (tol 1e-8) over %d instances, %.2fs (budget 30s)",
             max_oracle_dev, kInstanceCount, elapsed));
  report(2, "projection identity", max_proj_dev <= 1e-9,
         fmt("max rel dev %.2e (tol 1e-9), eps=1e-12", max_proj_dev));
}

// ---- criterion 3: rank deficiency and kernel annihilation ----------------

void criterion_rank_deficiency() {
  int rank_mismatches = 0;
  double max_kernel_dev = 0.0;
  for (int t = 0; t < 100; ++t) {
    const FactorPair fp = random_full_rank_pair(static_cast<std::uint64_t>(t));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(vectorized_jacobian(fp));
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
      if (sv(i) > 1e-8 * sv(0)) ++rank;
    if (rank != (fp.m() + fp.n()) * fp.r() - fp.r() * fp.r()) ++rank_mismatches;

    Xoshiro256pp rng(derive_seed(static_cast<std::uint64_t>(t), 0xacc3));
    const Eigen::MatrixXd X = gaussian_matrix(rng, fp.r(), fp.r());
    const double image = apply_jacobian(fp, kernel_direction(fp, X)).norm();
    max_kernel_dev =
        std::max(max_kernel_dev, image / std::max(fp.B.norm() * X.norm() * fp.A.norm(), 1e-30));
  }
  report(3, "rank deficiency", rank_mismatches == 0 && max_kernel_dev <= 1e-12,
         fmt("rank mismatches %d/100, max kernel image %.2e (tol 1e-12)", rank_mismatches,
             max_kernel_dev));
}

// ---- criterion 4: gauge invariance ----------------------------------------

void criterion_gauge_invariance() {
  double max_dev = 0.0;
  for (int t = 0; t < kInstanceCount; ++t) {
    const TestInstance inst = random_test_instance(static_cast<std::uint64_t>(t));
    const GradientBundle gb(inst.fp, inst.G);
    Xoshiro256pp rng(derive_seed(static_cast<std::uint64_t>(t), 0xacc4));
    const UpdateDelta base = family_solution(
        inst.fp, inst.w, gb, {Eigen::MatrixXd::Zero(inst.fp.r(), inst.fp.r())}, kTightEps);
    for (int k = 0; k < 20; ++k) {
      const GaugeParameter x{gaussian_matrix(rng, inst.fp.r(), inst.fp.r())};
      const UpdateDelta member = family_solution(inst.fp, inst.w, gb, x, kTightEps);
      max_dev = std::max(max_dev, (member.induced_w - base.induced_w).norm() /
                                      (1.0 + base.induced_w.norm()));
    }
  }
  report(4, "gauge invariance", max_dev <= 1e-9,
         fmt("max induced-W spread %.2e (tol 1e-9), 20 gauges/instance", max_dev));
}

// ---- criterion 5: balance stationarity and optimality ---------------------

void criterion_balance() {
  double max_grad = 0.0;
  int violations = 0;
  for (int t = 0; t < kInstanceCount; ++t) {
    const TestInstance inst = random_test_instance(static_cast<std::uint64_t>(t));
    const GradientBundle gb(inst.fp, inst.G);
    const GaugeParameter x = optimal_gauge(inst.fp, inst.w, gb, kTightEps);
    const auto objective = [&](const Eigen::MatrixXd& X) {
      return imbalance(inst.fp, inst.w,
                       family_solution(inst.fp, inst.w, gb, {X}, kTightEps));
    };
    const double psi = objective(x.X);
    const double gnorm = finite_diff_gradient(objective, x.X, 1e-5).norm();
    max_grad = std::max(max_grad, gnorm / (1.0 + psi));

    Xoshiro256pp rng(derive_seed(static_cast<std::uint64_t>(t), 0xacc5));
    for (int k = 0; k < 50; ++k) {
      Eigen::MatrixXd delta = gaussian_matrix(rng, inst.fp.r(), inst.fp.r());
      delta *= 1e-2 / delta.norm();
      if (objective(x.X + delta) < psi) ++violations;
    }
  }
  report(5, "balance stationarity", max_grad <= 1e-5 && violations == 0,
         fmt("max fd-grad %.2e (tol 1e-5), perturbation violations %d", max_grad, violations));
}

// ---- criterion 6: weighted projector laws ----------------------------------

void criterion_projector_laws() {
  double max_idem = 0.0, max_adj = 0.0, max_degen = 0.0;
  for (int t = 0; t < kInstanceCount; ++t) {
    const TestInstance inst = random_test_instance(static_cast<std::uint64_t>(t));
    Xoshiro256pp rng(derive_seed(static_cast<std::uint64_t>(t), 0xacc6));
    const Eigen::Index m = inst.fp.m(), n = inst.fp.n();
    const Eigen::MatrixXd Z = gaussian_matrix(rng, m, n);
    Eigen::MatrixXd Y = gaussian_matrix(rng, m, n);
    Y /= Y.norm();

    const Eigen::MatrixXd pz = project_weighted(inst.fp, inst.w, Z);
    max_idem = std::max(max_idem, (project_weighted(inst.fp, inst.w, pz) - pz).norm() /
                                      (1.0 + Z.norm()));
    const double lhs = weighted_inner(inst.w, project_weighted(inst.fp, inst.w, Y), Z / Z.norm());
    const double rhs =
        weighted_inner(inst.w, Y, project_weighted(inst.fp, inst.w, Z / Z.norm()));
    max_adj = std::max(max_adj, std::abs(lhs - rhs));

    const DiagWeights id = DiagWeights::identity(m, n);
    max_degen = std::max(max_degen, (project_weighted(inst.fp, id, Z) -
                                     project_standard(inst.fp, Z)).norm() / (1.0 + Z.norm()));
  }
  report(6, "weighted projector laws",
         max_idem <= 1e-10 && max_adj <= 1e-10 && max_degen <= 1e-13,
         fmt("idempotence %.2e, self-adjointness %.2e (tol 1e-10), identity gap %.2e (tol 1e-13)",
             max_idem, max_adj, max_degen));
}

// ---- criterion 7: identity-weights coincidence -----------------------------

void criterion_identity_coincidence() {
  double max_dev = 0.0;
  for (int t = 0; t < 100; ++t) {
    Xoshiro256pp rng(derive_seed(static_cast<std::uint64_t>(t), 0xacc7));
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.next() % 7);
    const Eigen::Index r =
        1 + static_cast<Eigen::Index>(rng.next() % std::min<Eigen::Index>(3, n));
    const FactorPair fp(full_rank_matrix(rng, n, r), full_rank_matrix(rng, r, n));
    Eigen::MatrixXd G(n, n);  // square + unit-magnitude entries force L = R = I
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) G(i, j) = (rng.next() & 1) ? 1.0 : -1.0;

    OptimizerConfig cfg;
    cfg.learning_rate = 0.25;
    cfg.decay_row = 0.0;
    cfg.decay_col = 0.0;
    const AdafactorState state = AdafactorState::fresh(n, n, 0.0, 0.0, cfg.eps);
    const auto [ada_fp, st] = step_adaprelora_sgd(fp, state, G, cfg);
    (void)st;
    const FactorPair id_fp = step_identity_projected(fp, G, cfg);
    max_dev = std::max(max_dev, (ada_fp.B - id_fp.B).norm() / (1.0 + id_fp.B.norm()));
    max_dev = std::max(max_dev, (ada_fp.A - id_fp.A).norm() / (1.0 + id_fp.A.norm()));
  }
  report(7, "identity-weights coincidence", max_dev <= 1e-12,
         fmt("max step gap %.2e (tol 1e-12), 100 instances", max_dev));
}

// ---- criterion 8: chain-rule gradients --------------------------------------

void criterion_chain_rule() {
  double max_dev = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::uint64_t seed = static_cast<std::uint64_t>(t);
    const ProblemInstance problem =
        make_problem(ProblemKind::recovery, 6, 5, 2, 20.0, derive_seed(seed, 0xacc8));
    Xoshiro256pp rng(derive_seed(seed, 0xacc9));
    const Eigen::MatrixXd B = gaussian_matrix(rng, 6, 2);
    const Eigen::MatrixXd A = gaussian_matrix(rng, 2, 5);
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
    max_dev = std::max(max_dev, (finite_diff_gradient(loss_of_b, B) - gb.G_B).norm() /
                                    (1.0 + gb.G_B.norm()));
    max_dev = std::max(max_dev, (finite_diff_gradient(loss_of_a, A) - gb.G_A).norm() /
                                    (1.0 + gb.G_A.norm()));
  }
  report(8, "chain-rule gradients", max_dev <= 1e-6,
         fmt("max rel dev vs central differences %.2e (tol 1e-6), 50 points", max_dev));
}

// ---- criterion 9: memory accounting -----------------------------------------

void criterion_memory_accounting() {
  const Eigen::Index m = 13, n = 9, r = 3;
  OptimizerConfig cfg;
  cfg.learning_rate = 0.1;
  bool ok = true;
  {
    OptimizerSession s(OptimizerKind::adaprelora_sgd, m, n, r, cfg, 1);
    ok = ok && s.state_scalar_count() == m + n;
  }
  {
    cfg.momentum_mode = MomentumMode::factor_space;
    OptimizerSession s(OptimizerKind::adaprelora_momentum, m, n, r, cfg, 1);
    ok = ok && s.state_scalar_count() == m + n + (m + n) * r;
  }
  {
    cfg.momentum_mode = MomentumMode::w_space;
    OptimizerSession s(OptimizerKind::adaprelora_momentum, m, n, r, cfg, 1);
    ok = ok && s.state_scalar_count() == m + n + m * n;
  }
  report(9, "memory accounting", ok,
         "state scalars: sgd m+n, factor momentum +(m+n)r, w momentum +mn (exact)");
}

// ---- criterion 10: convergence comparison ------------------------------------

long tuned_median_steps(const RunConfig& cfg, const std::vector<CellResult>& cells,
                        OptimizerKind kind) {
  long best = cfg.steps + 1;
  for (int li = 0; li < static_cast<int>(cfg.learning_rates.size()); ++li) {
    std::vector<long> steps;
    for (const auto& cell : cells)
      if (cell.optimizer == kind && cell.lr_index == li)
        steps.push_back(cell.steps_to_threshold >= 0 ? cell.steps_to_threshold : cfg.steps);
    if (steps.empty()) continue;
    std::sort(steps.begin(), steps.end());
    best = std::min(best, steps[steps.size() / 2]);
  }
  return best;
}

void criterion_convergence() {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.problem.kind = ProblemKind::recovery;
  cfg.problem.m = 32;
  cfg.problem.n = 32;
  cfg.problem.rank = 4;
  cfg.problem.planted_rank = 4;
  cfg.problem.condition_number = 100.0;
  cfg.optimizers = {OptimizerKind::adaprelora_sgd, OptimizerKind::factor_sgd,
                    OptimizerKind::scaled_gd};
  cfg.replicates = 5;
  cfg.steps = 5000;
  cfg.master_seed = 2024;
  cfg.loss_threshold = 1e-6;
  cfg.stop_on_threshold = true;
  cfg.learning_rates.clear();
  for (int i = 0; i < 7; ++i)
    cfg.learning_rates.push_back(std::pow(10.0, -3.0 + 0.5 * static_cast<double>(i)));

  const std::vector<CellResult> cells = run_grid(cfg, 1);
  const long ada = tuned_median_steps(cfg, cells, OptimizerKind::adaprelora_sgd);
  const long plain = tuned_median_steps(cfg, cells, OptimizerKind::factor_sgd);
  const long scaled = tuned_median_steps(cfg, cells, OptimizerKind::scaled_gd);
  const double elapsed = seconds_since(start);

  double best_rel_final = std::numeric_limits<double>::infinity();
  for (const auto& cell : cells)
    if (cell.optimizer == OptimizerKind::adaprelora_sgd && !cell.losses.empty())
      best_rel_final = std::min(best_rel_final, cell.losses.back() / cell.losses.front());

  const bool reached = ada <= cfg.steps;
  const bool beats_plain = ada * 2 <= plain;
  const bool tracks_scaled = ada <= scaled + scaled / 2;
  report(10, "convergence comparison",
         reached && beats_plain && tracks_scaled && elapsed <= 120.0,
         fmt("tuned median steps to 1e-6 rel: ada=%ld plain=%ld scaled=%ld "
             "(ada best rel loss %.1e), %.1fs (budget 120s)",
             ada, plain, scaled, best_rel_final, elapsed));
}

// ---- criterion 11: determinism -----------------------------------------------

std::string normalized_body(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    const auto cut = line.rfind(',');
    out << (cut == std::string::npos ? line : line.substr(0, cut)) << '\n';
  }
  return out.str();
}

void criterion_determinism() {
  const fs::path dir = fs::temp_directory_path() / "adaprelora_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path config_path = dir / "det.ini";
  {
    std::ofstream out(config_path);
    out << "[problem]\nkind = recovery\nm = 12\nn = 10\nrank = 3\nplanted_rank = 3\n"
        << "condition_number = 25\n"
        << "[optimizers]\nnames = adaprelora_sgd, scaled_gd\n"
        << "[run]\nsteps = 40\nreplicates = 2\nlearning_rates = 0.01, 0.1\nmaster_seed = 77\n";
  }

  bool ok = true;
  std::string detail = "CSV bodies identical across reruns (wall_clock_ns excluded)";
  const fs::path out1 = dir / "run1", out2 = dir / "run2";
  char errbuf[256] = {0};
  if (apl_run_config(config_path.string().c_str(), out1.string().c_str(), 2, nullptr, nullptr,
                     errbuf, sizeof(errbuf)) != APL_OK ||
      apl_run_config(config_path.string().c_str(), out2.string().c_str(), 2, nullptr, nullptr,
                     errbuf, sizeof(errbuf)) != APL_OK) {
    ok = false;
    detail = std::string("run failed: ") + errbuf;
  } else {
    int compared = 0;
    for (const auto& entry : fs::directory_iterator(out1)) {
      const fs::path other = out2 / entry.path().filename();
      if (!fs::exists(other) || normalized_body(entry.path()) != normalized_body(other)) {
        ok = false;
        detail = "mismatch in " + entry.path().filename().string();
        break;
      }
      ++compared;
    }
    if (ok && compared != 9) {  // 2 optimizers x 2 rates x 2 replicates + summary
      ok = false;
      detail = fmt("expected 9 files, compared %d", compared);
    }
  }
  fs::remove_all(dir);
  report(11, "determinism", ok, detail);
}

}  // namespace

int main() {
  std::printf("acceptance suite (library version %s)\n", apl_version());
  criterion_oracle_and_projection();
  criterion_rank_deficiency();
  criterion_gauge_invariance();
  criterion_balance();
  criterion_projector_laws();
  criterion_identity_coincidence();
  criterion_chain_rule();
  criterion_memory_accounting();
  criterion_convergence();
  criterion_determinism();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
