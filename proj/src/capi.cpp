#include "adaprelora.h"

#include <cstring>
#include <new>
#include <string>

#include "adaprelora/adafactor.hpp"
#include "adaprelora/errors.hpp"
#include "adaprelora/harness.hpp"
#include "adaprelora/optimizers.hpp"
#include "adaprelora/problems.hpp"
#include "adaprelora/solver.hpp"
#include "adaprelora/verify.hpp"
#include "adaprelora/version.hpp"

using namespace adaprelora;

struct apl_optimizer {
  OptimizerSession session;
};

struct apl_problem {
  ProblemInstance instance;
};

namespace {

apl_status translate_current_exception() {
  try {
    throw;
  } catch (const dimension_error&) {
    return APL_ERROR_DIMENSION;
  } catch (const invalid_value_error&) {
    return APL_ERROR_INVALID_VALUE;
  } catch (const singular_error&) {
    return APL_ERROR_SINGULAR;
  } catch (const config_error&) {
    return APL_ERROR_CONFIG;
  } catch (const std::bad_alloc&) {
    return APL_ERROR_UNKNOWN;
  } catch (const std::exception&) {
    return APL_ERROR_UNKNOWN;
  } catch (...) {
    return APL_ERROR_UNKNOWN;
  }
}

OptimizerConfig to_cpp_config(const apl_optimizer_config* config) {
  OptimizerConfig cfg;
  if (!config) return cfg;
  cfg.learning_rate = config->learning_rate;
  cfg.weight_decay = config->weight_decay;
  cfg.decay_row = config->decay_row;
  cfg.decay_col = config->decay_col;
  cfg.momentum_decay = config->momentum_decay;
  cfg.eps = config->eps;
  cfg.momentum_mode = static_cast<MomentumMode>(config->momentum_mode);
  cfg.gradient_source = static_cast<GradientSource>(config->gradient_source);
  return cfg;
}

void copy_into(const Eigen::MatrixXd& src, double* dst) {
  std::memcpy(dst, src.data(), sizeof(double) * static_cast<std::size_t>(src.size()));
}

Eigen::Map<const Eigen::MatrixXd> map_matrix(const double* data, Eigen::Index rows,
                                             Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(data, rows, cols);
}

void emit_lines(apl_log_fn log, void* user, const std::string& text) {
  if (!log) return;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const std::size_t end = text.find('\n', begin);
    if (end == std::string::npos) {
      if (begin < text.size()) log(text.substr(begin).c_str(), user);
      return;
    }
    log(text.substr(begin, end - begin).c_str(), user);
    begin = end + 1;
  }
}

void fill_errbuf(char* errbuf, size_t errbuf_len, const char* message) {
  if (!errbuf || errbuf_len == 0) return;
  std::strncpy(errbuf, message, errbuf_len - 1);
  errbuf[errbuf_len - 1] = '\0';
}

}  // namespace

extern "C" {

const char* apl_version(void) { return kVersion; }

const char* apl_status_message(apl_status status) {
  switch (status) {
    case APL_OK:
      return "ok";
    case APL_ERROR_DIMENSION:
      return "dimension mismatch";
    case APL_ERROR_INVALID_VALUE:
      return "invalid or non-finite value";
    case APL_ERROR_SINGULAR:
      return "numerically singular Gram matrix";
    case APL_ERROR_CONFIG:
      return "config error";
    case APL_ERROR_IO:
      return "i/o error";
    case APL_ERROR_VERIFY_FAILED:
      return "verification failed";
    case APL_ERROR_NULL_ARGUMENT:
      return "null argument";
    case APL_ERROR_UNKNOWN:
      return "unknown error";
  }
  return "unknown status";
}

void apl_optimizer_config_defaults(apl_optimizer_config* config) {
  if (!config) return;
  const OptimizerConfig defaults;
  config->learning_rate = defaults.learning_rate;
  config->weight_decay = defaults.weight_decay;
  config->decay_row = defaults.decay_row;
  config->decay_col = defaults.decay_col;
  config->momentum_decay = defaults.momentum_decay;
  config->eps = defaults.eps;
  config->momentum_mode = APL_MOMENTUM_NONE;
  config->gradient_source = APL_GRADIENT_EXACT;
}

apl_status apl_optimizer_create(apl_optimizer_kind kind, int64_t m, int64_t n, int64_t r,
                                const apl_optimizer_config* config, uint64_t init_seed,
                                apl_optimizer** out) {
  if (!out) return APL_ERROR_NULL_ARGUMENT;
  *out = nullptr;
  if (kind < APL_OPT_ADAPRELORA_SGD || kind > APL_OPT_IDENTITY_PROJECTED)
    return APL_ERROR_INVALID_VALUE;
  try {
    auto cpp_kind = static_cast<OptimizerKind>(kind);
    auto* handle = new apl_optimizer{
        OptimizerSession(cpp_kind, m, n, r, to_cpp_config(config), init_seed)};
    *out = handle;
    return APL_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

void apl_optimizer_destroy(apl_optimizer* optimizer) { delete optimizer; }

apl_status apl_optimizer_step(apl_optimizer* optimizer, const double* grad) {
  if (!optimizer || !grad) return APL_ERROR_NULL_ARGUMENT;
  try {
    const auto& fp = optimizer->session.factors();
    optimizer->session.step(map_matrix(grad, fp.m(), fp.n()));
    return APL_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

apl_status apl_optimizer_get_factors(const apl_optimizer* optimizer, double* b, double* a) {
  if (!optimizer || !b || !a) return APL_ERROR_NULL_ARGUMENT;
  copy_into(optimizer->session.factors().B, b);
  copy_into(optimizer->session.factors().A, a);
  return APL_OK;
}

apl_status apl_optimizer_state_scalars(const apl_optimizer* optimizer, int64_t* count) {
  if (!optimizer || !count) return APL_ERROR_NULL_ARGUMENT;
  *count = optimizer->session.state_scalar_count();
  return APL_OK;
}

apl_status apl_problem_create(apl_problem_kind kind, int64_t m, int64_t n, int64_t planted_rank,
                              double condition_number, uint64_t seed, apl_problem** out) {
  if (!out) return APL_ERROR_NULL_ARGUMENT;
  *out = nullptr;
  try {
    auto cpp_kind = kind == APL_PROBLEM_RECOVERY ? ProblemKind::recovery : ProblemKind::sensing;
    auto* handle =
        new apl_problem{make_problem(cpp_kind, m, n, planted_rank, condition_number, seed)};
    *out = handle;
    return APL_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

void apl_problem_destroy(apl_problem* problem) { delete problem; }

apl_status apl_problem_eval(const apl_problem* problem, int64_t r, const double* b,
                            const double* a, double* loss, double* grad) {
  if (!problem || !b || !a || !loss) return APL_ERROR_NULL_ARGUMENT;
  try {
    const Eigen::Index m = problem->instance.m(), n = problem->instance.n();
    const FactorPair fp(map_matrix(b, m, r), map_matrix(a, r, n));
    const auto [value, gradient] = loss_and_gradient(problem->instance, fp);
    *loss = value;
    if (grad) copy_into(gradient, grad);
    return APL_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

apl_status apl_closed_form_update(int64_t m, int64_t n, int64_t r, double eps, const double* b,
                                  const double* a, const double* grad, const double* l_half,
                                  const double* r_half, double* delta_b, double* delta_a) {
  if (!b || !a || !grad || !delta_b || !delta_a) return APL_ERROR_NULL_ARGUMENT;
  try {
    const FactorPair fp(map_matrix(b, m, r), map_matrix(a, r, n));
    DiagWeights w = DiagWeights::identity(m, n);
    if (l_half || r_half) {
      Eigen::VectorXd lh = l_half ? Eigen::Map<const Eigen::VectorXd>(l_half, m).eval()
                                  : Eigen::VectorXd::Ones(m).eval();
      Eigen::VectorXd rh = r_half ? Eigen::Map<const Eigen::VectorXd>(r_half, n).eval()
                                  : Eigen::VectorXd::Ones(n).eval();
      w = DiagWeights::from_half_diagonals(std::move(lh), std::move(rh));
    }
    const GradientBundle gb(fp, map_matrix(grad, m, n));
    const UpdateDelta delta = closed_form_update(fp, w, gb, eps);
    copy_into(delta.dB, delta_b);
    copy_into(delta.dA, delta_a);
    return APL_OK;
  } catch (...) {
    return translate_current_exception();
  }
}

apl_status apl_run_config(const char* config_path, const char* out_dir, int threads,
                          apl_log_fn log, void* user, char* errbuf, size_t errbuf_len) {
  if (!config_path || !out_dir) return APL_ERROR_NULL_ARGUMENT;
  try {
    const RunConfig cfg = load_run_config(config_path);
    const std::vector<CellResult> cells = run_grid(cfg, threads);
    const std::string table = write_run_outputs(cfg, cells, out_dir);
    emit_lines(log, user, table);
    return APL_OK;
  } catch (const config_error& e) {
    fill_errbuf(errbuf, errbuf_len, e.what());
    return APL_ERROR_CONFIG;
  } catch (const std::exception& e) {
    fill_errbuf(errbuf, errbuf_len, e.what());
    return APL_ERROR_IO;
  } catch (...) {
    return APL_ERROR_UNKNOWN;
  }
}

apl_status apl_verify(int full, apl_log_fn log, void* user) {
  try {
    const auto results =
        run_verification(full ? VerifyIntensity::full : VerifyIntensity::quick);
    bool all_pass = true;
    for (const auto& result : results) {
      if (log) log(format_property_result(result).c_str(), user);
      all_pass = all_pass && result.pass;
    }
    return all_pass ? APL_OK : APL_ERROR_VERIFY_FAILED;
  } catch (...) {
    return translate_current_exception();
  }
}

}  // extern "C"
