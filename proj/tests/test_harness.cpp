#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adaprelora/errors.hpp"
#include "adaprelora/harness.hpp"

using namespace adaprelora;
namespace fs = std::filesystem;

namespace {

const char* kMinimalConfig = R"(
# small smoke benchmark
[problem]
kind = recovery
m = 6
n = 5
rank = 2
planted_rank = 2
condition_number = 10

[optimizers]
names = adaprelora_sgd
decay_row = 0.98
decay_col = 0.98

[run]
steps = 10
replicates = 1
learning_rates = 0.05
master_seed = 7
)";

// The CSV body for determinism comparisons: metadata lines dropped, and the
// wall_clock_ns column (the only nondeterministic content) stripped.
std::string normalized_body(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;
    const auto cut = line.rfind(',');
    out << (cut == std::string::npos ? line : line.substr(0, cut)) << '\n';
  }
  return out.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("adaprelora_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("config parsing: happy path and the logspace shorthand") {
  const RunConfig cfg = parse_run_config(kMinimalConfig);
  CHECK(cfg.problem.m == 6);
  CHECK(cfg.problem.n == 5);
  CHECK(cfg.optimizers.size() == 1);
  CHECK(cfg.optimizers[0] == OptimizerKind::adaprelora_sgd);
  CHECK(cfg.learning_rates.size() == 1);
  CHECK(cfg.steps == 10);
  CHECK(cfg.master_seed == 7);

  const RunConfig grid = parse_run_config(R"(
[problem]
m = 4
n = 4
rank = 2
planted_rank = 2
[optimizers]
names = factor_sgd, scaled_gd
[run]
steps = 5
learning_rates = logspace(1e-3, 1, 7)
)");
  REQUIRE(grid.learning_rates.size() == 7);
  CHECK(grid.learning_rates.front() == doctest::Approx(1e-3));
  CHECK(grid.learning_rates.back() == doctest::Approx(1.0));
}

TEST_CASE("config parsing: unknown keys and malformed lines carry line numbers") {
  const std::string bad = "[problem]\nm = 4\nnn = 7\n";
  try {
    parse_run_config(bad);
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(e.line() == 3);
    CHECK(std::string(e.what()).find("nn") != std::string::npos);
  }

  CHECK_THROWS_AS(parse_run_config("[nope]\n"), config_error);
  CHECK_THROWS_AS(parse_run_config("m = 4\n"), config_error);  // key before section
  CHECK_THROWS_AS(parse_run_config("[run]\nsteps == 4\n"), config_error);
  CHECK_THROWS_AS(parse_run_config("[optimizers]\nnames = warp_drive\n"), config_error);
  CHECK_THROWS_AS(parse_run_config("[run]\nlearning_rates = 0.1\n"), config_error);  // no names
}

TEST_CASE("row-count contract: steps + 1 rows including step 0") {
  const RunConfig cfg = parse_run_config(kMinimalConfig);
  const std::vector<CellResult> cells = run_grid(cfg);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].losses.size() == 11);
  const std::string csv = cell_csv_text(cfg, cells[0]);

  int data_rows = 0;
  bool saw_header = false;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("step,loss,grad_norm,wall_clock_ns", 0) == 0) {
      saw_header = true;
      continue;
    }
    if (!line.empty() && line[0] != '#' && saw_header) ++data_rows;
  }
  CHECK(saw_header);
  CHECK(data_rows == 11);
}

TEST_CASE("grid enumeration: 2 optimizers x 3 rates -> 6 distinct files") {
  RunConfig cfg = parse_run_config(kMinimalConfig);
  cfg.optimizers = {OptimizerKind::factor_sgd, OptimizerKind::scaled_gd};
  cfg.learning_rates = {0.01, 0.05, 0.1};
  cfg.steps = 3;
  const std::vector<CellResult> cells = run_grid(cfg);
  REQUIRE(cells.size() == 6);

  std::vector<std::string> names;
  for (const auto& cell : cells) names.push_back(cell_csv_filename(cell));
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());

  const fs::path dir = fresh_dir("grid");
  write_run_outputs(cfg, cells, dir.string());
  for (const auto& name : names) CHECK(fs::exists(dir / name));
  CHECK(fs::exists(dir / "summary.csv"));
  const std::string summary = slurp(dir / "summary.csv");
  CHECK(summary.rfind("optimizer,learning_rate,median_final_loss,median_steps_to_threshold,"
                      "diverged_cells\n", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("rerunning an identical config is byte-identical up to wall clock") {
  const RunConfig cfg = parse_run_config(kMinimalConfig);
  const std::vector<CellResult> first = run_grid(cfg);
  const std::vector<CellResult> second = run_grid(cfg);
  REQUIRE(first.size() == second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(normalized_body(cell_csv_text(cfg, first[i])) ==
          normalized_body(cell_csv_text(cfg, second[i])));
  }
  CHECK(summary_csv_text(cfg, first) == summary_csv_text(cfg, second));
}

TEST_CASE("threaded and sequential grids agree") {
  RunConfig cfg = parse_run_config(kMinimalConfig);
  cfg.optimizers = {OptimizerKind::adaprelora_sgd, OptimizerKind::scaled_gd};
  cfg.learning_rates = {0.01, 0.1};
  cfg.replicates = 2;
  cfg.steps = 5;
  const std::vector<CellResult> seq = run_grid(cfg, 1);
  const std::vector<CellResult> par = run_grid(cfg, 4);
  REQUIRE(seq.size() == par.size());
  for (std::size_t i = 0; i < seq.size(); ++i)
    CHECK(normalized_body(cell_csv_text(cfg, seq[i])) ==
          normalized_body(cell_csv_text(cfg, par[i])));
}

TEST_CASE("divergent cells are flagged without killing the run") {
  RunConfig cfg = parse_run_config(kMinimalConfig);
  cfg.optimizers = {OptimizerKind::factor_sgd};
  cfg.learning_rates = {50.0};  // way beyond stability
  cfg.steps = 200;
  const std::vector<CellResult> cells = run_grid(cfg);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].diverged);
  CHECK(cells[0].diverged_step >= 0);
  const std::string csv = cell_csv_text(cfg, cells[0]);
  CHECK(csv.find("# diverged=1\n") != std::string::npos);
  for (double loss : cells[0].losses) CHECK(std::isfinite(loss));
}

TEST_CASE("stop_on_threshold truncates the trajectory at the crossing") {
  RunConfig cfg = parse_run_config(kMinimalConfig);
  cfg.optimizers = {OptimizerKind::scaled_gd};
  cfg.learning_rates = {0.5};
  cfg.steps = 2000;
  cfg.loss_threshold = 1e-4;
  cfg.stop_on_threshold = true;
  const std::vector<CellResult> cells = run_grid(cfg);
  REQUIRE(cells.size() == 1);
  if (cells[0].steps_to_threshold >= 0)
    CHECK(static_cast<long>(cells[0].losses.size()) == cells[0].steps_to_threshold + 1);
}

TEST_CASE("replicate seeds are optimizer-independent but replicate-dependent") {
  CHECK(replicate_problem_seed(1, 0) != replicate_problem_seed(1, 1));
  CHECK(replicate_problem_seed(1, 0) != replicate_problem_seed(2, 0));
  CHECK(replicate_problem_seed(1, 0) != replicate_init_seed(1, 0));
}
