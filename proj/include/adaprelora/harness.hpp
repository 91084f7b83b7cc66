#pragma once

// Benchmark driver: parses the line-oriented config format, runs the
// (optimizer x learning-rate x replicate) grid, and emits per-cell CSV
// trajectories plus a summary table. Grid cells are independent and may
// run on worker threads; all output content is deterministic except the
// wall_clock_ns column.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "adaprelora/optimizers.hpp"
#include "adaprelora/problems.hpp"

namespace adaprelora {

struct ProblemSpec {
  ProblemKind kind = ProblemKind::recovery;
  Eigen::Index m = 32;
  Eigen::Index n = 32;
  Eigen::Index rank = 4;  // optimizer factor rank
  Eigen::Index planted_rank = 4;
  double condition_number = 1.0;
};

struct RunConfig {
  ProblemSpec problem;
  std::vector<OptimizerKind> optimizers;
  OptimizerConfig optimizer_base;  // learning_rate comes from the grid below
  std::vector<double> learning_rates;
  int replicates = 1;
  long steps = 100;
  std::uint64_t master_seed = 0;
  double loss_threshold = 1e-6;  // relative to the step-0 loss
  bool stop_on_threshold = false;
};

/// Parses the `[section]` / `key = value` config text. Unknown sections or
/// keys raise config_error carrying the 1-based line number.
RunConfig parse_run_config(const std::string& text);

/// Reads and parses a config file; missing file raises config_error.
RunConfig load_run_config(const std::string& path);

/// Loss threshold crossing is recorded but never reached is -1.
struct CellResult {
  OptimizerKind optimizer = OptimizerKind::adaprelora_sgd;
  int lr_index = 0;
  double learning_rate = 0.0;
  int replicate = 0;
  std::uint64_t problem_seed = 0;
  std::uint64_t init_seed = 0;
  std::vector<double> losses;             // row k = loss after k steps
  std::vector<double> grad_norms;
  std::vector<std::int64_t> wall_clock_ns;
  bool diverged = false;
  long diverged_step = -1;
  long steps_to_threshold = -1;
};

/// Replicate-level seeds derived from the master seed; identical for every
/// optimizer and learning rate so all cells of one replicate see the same
/// instance.
std::uint64_t replicate_problem_seed(std::uint64_t master_seed, int replicate);
std::uint64_t replicate_init_seed(std::uint64_t master_seed, int replicate);

/// Runs every grid cell; `threads` <= 1 means sequential. Cell order in the
/// result is (optimizer, learning rate, replicate), row-major.
std::vector<CellResult> run_grid(const RunConfig& cfg, int threads = 1);

std::string cell_csv_filename(const CellResult& cell);
std::string cell_csv_text(const RunConfig& cfg, const CellResult& cell);
std::string summary_csv_text(const RunConfig& cfg, const std::vector<CellResult>& cells);
std::string summary_table_text(const RunConfig& cfg, const std::vector<CellResult>& cells);

/// Writes one CSV per cell plus summary.csv into out_dir (created if
/// absent) and returns the human-readable summary table.
std::string write_run_outputs(const RunConfig& cfg, const std::vector<CellResult>& cells,
                              const std::string& out_dir);

}  // namespace adaprelora
