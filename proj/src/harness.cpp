#include "adaprelora/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

#include "adaprelora/errors.hpp"
#include "adaprelora/rng.hpp"
#include "adaprelora/version.hpp"

namespace adaprelora {

namespace {

constexpr double kDivergenceLossLimit = 1e12;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& value, int line) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw config_error("expected a number, got '" + value + "'", line);
  }
  if (pos != value.size()) throw config_error("trailing characters in number '" + value + "'", line);
  return v;
}

long parse_long(const std::string& value, int line) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(value, &pos);
  } catch (const std::exception&) {
    throw config_error("expected an integer, got '" + value + "'", line);
  }
  if (pos != value.size())
    throw config_error("trailing characters in integer '" + value + "'", line);
  return v;
}

std::uint64_t parse_u64(const std::string& value, int line) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw config_error("expected an unsigned integer, got '" + value + "'", line);
  }
  if (pos != value.size())
    throw config_error("trailing characters in integer '" + value + "'", line);
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& value, int line) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw config_error("expected true/false, got '" + value + "'", line);
}

// learning_rates accepts either an explicit comma list or
// logspace(lo, hi, count).
std::vector<double> parse_learning_rates(const std::string& value, int line) {
  const std::string v = trim(value);
  if (v.rfind("logspace(", 0) == 0) {
    if (v.back() != ')') throw config_error("malformed logspace(...)", line);
    const auto inner = split_list(v.substr(9, v.size() - 10));
    if (inner.size() != 3) throw config_error("logspace needs (lo, hi, count)", line);
    const double lo = parse_double(inner[0], line);
    const double hi = parse_double(inner[1], line);
    const long count = parse_long(inner[2], line);
    if (!(lo > 0.0) || !(hi > lo) || count < 2)
      throw config_error("logspace needs 0 < lo < hi and count >= 2", line);
    std::vector<double> rates(static_cast<std::size_t>(count));
    const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(count - 1);
    for (long i = 0; i < count; ++i)
      rates[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * static_cast<double>(i));
    return rates;
  }
  std::vector<double> rates;
  for (const auto& tok : split_list(v)) rates.push_back(parse_double(tok, line));
  return rates;
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_double_short(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

const char* problem_kind_name(ProblemKind kind) {
  return kind == ProblemKind::recovery ? "recovery" : "sensing";
}

const char* momentum_mode_name(MomentumMode mode) {
  switch (mode) {
    case MomentumMode::none:
      return "none";
    case MomentumMode::w_space:
      return "w_space";
    case MomentumMode::factor_space:
      return "factor_space";
  }
  return "none";
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  cfg.optimizers.clear();
  cfg.learning_rates.clear();

  bool saw_names = false, saw_rates = false;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw config_error("malformed section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      if (section != "problem" && section != "optimizers" && section != "run")
        throw config_error("unknown section [" + section + "]", line_no);
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) throw config_error("expected key = value", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw config_error("empty key or value", line_no);
    if (section.empty()) throw config_error("key before any [section]", line_no);

    if (section == "problem") {
      if (key == "kind") {
        if (value == "recovery")
          cfg.problem.kind = ProblemKind::recovery;
        else if (value == "sensing")
          cfg.problem.kind = ProblemKind::sensing;
        else
          throw config_error("unknown problem kind '" + value + "'", line_no);
      } else if (key == "m") {
        cfg.problem.m = parse_long(value, line_no);
      } else if (key == "n") {
        cfg.problem.n = parse_long(value, line_no);
      } else if (key == "rank") {
        cfg.problem.rank = parse_long(value, line_no);
      } else if (key == "planted_rank") {
        cfg.problem.planted_rank = parse_long(value, line_no);
      } else if (key == "condition_number") {
        cfg.problem.condition_number = parse_double(value, line_no);
      } else {
        throw config_error("unknown key '" + key + "' in [problem]", line_no);
      }
    } else if (section == "optimizers") {
      if (key == "names") {
        for (const auto& name : split_list(value)) {
          const auto kind = optimizer_kind_from_name(name);
          if (!kind) throw config_error("unknown optimizer '" + name + "'", line_no);
          cfg.optimizers.push_back(*kind);
        }
        saw_names = true;
      } else if (key == "decay_row") {
        cfg.optimizer_base.decay_row = parse_double(value, line_no);
      } else if (key == "decay_col") {
        cfg.optimizer_base.decay_col = parse_double(value, line_no);
      } else if (key == "momentum_decay") {
        cfg.optimizer_base.momentum_decay = parse_double(value, line_no);
      } else if (key == "weight_decay") {
        cfg.optimizer_base.weight_decay = parse_double(value, line_no);
      } else if (key == "eps") {
        cfg.optimizer_base.eps = parse_double(value, line_no);
      } else if (key == "momentum_mode") {
        if (value == "none")
          cfg.optimizer_base.momentum_mode = MomentumMode::none;
        else if (value == "w_space")
          cfg.optimizer_base.momentum_mode = MomentumMode::w_space;
        else if (value == "factor_space")
          cfg.optimizer_base.momentum_mode = MomentumMode::factor_space;
        else
          throw config_error("unknown momentum_mode '" + value + "'", line_no);
      } else if (key == "gradient_source") {
        if (value == "exact")
          cfg.optimizer_base.gradient_source = GradientSource::exact;
        else if (value == "surrogate")
          cfg.optimizer_base.gradient_source = GradientSource::surrogate;
        else
          throw config_error("unknown gradient_source '" + value + "'", line_no);
      } else {
        throw config_error("unknown key '" + key + "' in [optimizers]", line_no);
      }
    } else {  // [run]
      if (key == "steps") {
        cfg.steps = parse_long(value, line_no);
        if (cfg.steps < 0) throw config_error("steps must be >= 0", line_no);
      } else if (key == "replicates") {
        cfg.replicates = static_cast<int>(parse_long(value, line_no));
        if (cfg.replicates < 1) throw config_error("replicates must be >= 1", line_no);
      } else if (key == "learning_rates") {
        cfg.learning_rates = parse_learning_rates(value, line_no);
        saw_rates = true;
      } else if (key == "master_seed") {
        cfg.master_seed = parse_u64(value, line_no);
      } else if (key == "loss_threshold") {
        cfg.loss_threshold = parse_double(value, line_no);
        if (!(cfg.loss_threshold > 0.0)) throw config_error("loss_threshold must be > 0", line_no);
      } else if (key == "stop_on_threshold") {
        cfg.stop_on_threshold = parse_bool(value, line_no);
      } else {
        throw config_error("unknown key '" + key + "' in [run]", line_no);
      }
    }
  }

  if (!saw_names || cfg.optimizers.empty()) throw config_error("no optimizers configured");
  if (!saw_rates || cfg.learning_rates.empty()) throw config_error("no learning_rates configured");
  for (double lr : cfg.learning_rates)
    if (!(lr > 0.0)) throw config_error("learning rates must be > 0");
  if (cfg.problem.rank < 1 || cfg.problem.rank > std::min(cfg.problem.m, cfg.problem.n))
    throw config_error("rank must satisfy 1 <= rank <= min(m, n)");
  if (cfg.problem.planted_rank < 1 ||
      cfg.problem.planted_rank > std::min(cfg.problem.m, cfg.problem.n))
    throw config_error("planted_rank must satisfy 1 <= planted_rank <= min(m, n)");
  if (!(cfg.problem.condition_number >= 1.0))
    throw config_error("condition_number must be >= 1");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::uint64_t replicate_problem_seed(std::uint64_t master_seed, int replicate) {
  return derive_seed(derive_seed(master_seed, 0x7082), static_cast<std::uint64_t>(replicate));
}

std::uint64_t replicate_init_seed(std::uint64_t master_seed, int replicate) {
  return derive_seed(derive_seed(master_seed, 0x1417), static_cast<std::uint64_t>(replicate));
}

namespace {

CellResult run_cell(const RunConfig& cfg, OptimizerKind kind, int lr_index, int replicate) {
  CellResult cell;
  cell.optimizer = kind;
  cell.lr_index = lr_index;
  cell.learning_rate = cfg.learning_rates[static_cast<std::size_t>(lr_index)];
  cell.replicate = replicate;
  cell.problem_seed = replicate_problem_seed(cfg.master_seed, replicate);
  cell.init_seed = replicate_init_seed(cfg.master_seed, replicate);

  const ProblemInstance problem =
      make_problem(cfg.problem.kind, cfg.problem.m, cfg.problem.n, cfg.problem.planted_rank,
                   cfg.problem.condition_number, cell.problem_seed);

  OptimizerConfig opt_cfg = cfg.optimizer_base;
  opt_cfg.learning_rate = cell.learning_rate;
  OptimizerSession session(kind, cfg.problem.m, cfg.problem.n, cfg.problem.rank, opt_cfg,
                           cell.init_seed);

  const auto start = std::chrono::steady_clock::now();
  double loss0 = 0.0;
  for (long k = 0; k <= cfg.steps; ++k) {
    double loss = 0.0;
    Eigen::MatrixXd grad;
    try {
      std::tie(loss, grad) = loss_and_gradient(problem, session.factors());
    } catch (const invalid_value_error&) {
      cell.diverged = true;
      cell.diverged_step = k;
      break;
    }
    if (!std::isfinite(loss)) {
      cell.diverged = true;
      cell.diverged_step = k;
      break;
    }
    const auto elapsed = std::chrono::duration_cast<std::chrono::nanoseconds>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    cell.losses.push_back(loss);
    cell.grad_norms.push_back(grad.norm());
    cell.wall_clock_ns.push_back(elapsed);
    if (k == 0) loss0 = loss;

    if (loss > kDivergenceLossLimit) {
      cell.diverged = true;
      cell.diverged_step = k;
      break;
    }
    if (cell.steps_to_threshold < 0 && loss <= cfg.loss_threshold * loss0)
      cell.steps_to_threshold = k;
    if (cell.steps_to_threshold >= 0 && cfg.stop_on_threshold) break;
    if (k == cfg.steps) break;

    try {
      session.step(grad);
    } catch (const invalid_value_error&) {
      cell.diverged = true;
      cell.diverged_step = k + 1;
      break;
    }
  }
  return cell;
}

}  // namespace

std::vector<CellResult> run_grid(const RunConfig& cfg, int threads) {
  struct CellKey {
    OptimizerKind kind;
    int lr_index;
    int replicate;
  };
  std::vector<CellKey> keys;
  for (OptimizerKind kind : cfg.optimizers)
    for (int li = 0; li < static_cast<int>(cfg.learning_rates.size()); ++li)
      for (int rep = 0; rep < cfg.replicates; ++rep) keys.push_back({kind, li, rep});

  std::vector<CellResult> cells(keys.size());
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(keys.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < keys.size(); ++i)
      cells[i] = run_cell(cfg, keys[i].kind, keys[i].lr_index, keys[i].replicate);
    return cells;
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= keys.size()) return;
      cells[i] = run_cell(cfg, keys[i].kind, keys[i].lr_index, keys[i].replicate);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return cells;
}

std::string cell_csv_filename(const CellResult& cell) {
  std::ostringstream name;
  name << optimizer_kind_name(cell.optimizer) << "_lr" << cell.lr_index << "-"
       << format_double_short(cell.learning_rate) << "_seed" << cell.replicate << ".csv";
  return name.str();
}

std::string cell_csv_text(const RunConfig& cfg, const CellResult& cell) {
  std::ostringstream out;
  out << "# optimizer=" << optimizer_kind_name(cell.optimizer) << "\n";
  out << "# learning_rate=" << format_double(cell.learning_rate) << "\n";
  out << "# replicate=" << cell.replicate << "\n";
  out << "# problem_seed=" << cell.problem_seed << "\n";
  out << "# init_seed=" << cell.init_seed << "\n";
  out << "# problem_kind=" << problem_kind_name(cfg.problem.kind) << "\n";
  out << "# m=" << cfg.problem.m << "\n";
  out << "# n=" << cfg.problem.n << "\n";
  out << "# rank=" << cfg.problem.rank << "\n";
  out << "# planted_rank=" << cfg.problem.planted_rank << "\n";
  out << "# condition_number=" << format_double(cfg.problem.condition_number) << "\n";
  out << "# decay_row=" << format_double(cfg.optimizer_base.decay_row) << "\n";
  out << "# decay_col=" << format_double(cfg.optimizer_base.decay_col) << "\n";
  out << "# momentum_decay=" << format_double(cfg.optimizer_base.momentum_decay) << "\n";
  out << "# weight_decay=" << format_double(cfg.optimizer_base.weight_decay) << "\n";
  out << "# eps=" << format_double(cfg.optimizer_base.eps) << "\n";
  out << "# momentum_mode=" << momentum_mode_name(cfg.optimizer_base.momentum_mode) << "\n";
  out << "# gradient_source="
      << (cfg.optimizer_base.gradient_source == GradientSource::exact ? "exact" : "surrogate")
      << "\n";
  out << "# steps=" << cfg.steps << "\n";
  out << "# loss_threshold=" << format_double(cfg.loss_threshold) << "\n";
  out << "# master_seed=" << cfg.master_seed << "\n";
  out << "# version=" << kVersion << "\n";
  out << "# diverged=" << (cell.diverged ? 1 : 0) << "\n";
  out << "# diverged_step=" << cell.diverged_step << "\n";
  out << "# steps_to_threshold=" << cell.steps_to_threshold << "\n";
  out << "step,loss,grad_norm,wall_clock_ns\n";
  for (std::size_t k = 0; k < cell.losses.size(); ++k) {
    out << k << ',' << format_double(cell.losses[k]) << ',' << format_double(cell.grad_norms[k])
        << ',' << cell.wall_clock_ns[k] << "\n";
  }
  return out.str();
}

namespace {

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

struct GroupStats {
  double median_final_loss = std::numeric_limits<double>::quiet_NaN();
  long median_steps = -1;  // -1 = median replicate never reached the threshold
  int diverged_cells = 0;
};

GroupStats group_stats(const RunConfig& cfg, const std::vector<const CellResult*>& group) {
  GroupStats stats;
  std::vector<double> finals;
  std::vector<double> steps;
  for (const CellResult* cell : group) {
    if (!cell->losses.empty()) finals.push_back(cell->losses.back());
    steps.push_back(cell->steps_to_threshold >= 0
                        ? static_cast<double>(cell->steps_to_threshold)
                        : static_cast<double>(cfg.steps + 1));
    if (cell->diverged) ++stats.diverged_cells;
  }
  stats.median_final_loss = median(finals);
  const double med_steps = median(steps);
  stats.median_steps = med_steps > static_cast<double>(cfg.steps)
                           ? -1
                           : static_cast<long>(std::llround(med_steps));
  return stats;
}

}  // namespace

std::string summary_csv_text(const RunConfig& cfg, const std::vector<CellResult>& cells) {
  std::ostringstream out;
  out << "optimizer,learning_rate,median_final_loss,median_steps_to_threshold,diverged_cells\n";
  for (OptimizerKind kind : cfg.optimizers) {
    for (int li = 0; li < static_cast<int>(cfg.learning_rates.size()); ++li) {
      std::vector<const CellResult*> group;
      for (const auto& cell : cells)
        if (cell.optimizer == kind && cell.lr_index == li) group.push_back(&cell);
      const GroupStats stats = group_stats(cfg, group);
      out << optimizer_kind_name(kind) << ','
          << format_double(cfg.learning_rates[static_cast<std::size_t>(li)]) << ','
          << format_double(stats.median_final_loss) << ',' << stats.median_steps << ','
          << stats.diverged_cells << "\n";
    }
  }
  return out.str();
}

std::string summary_table_text(const RunConfig& cfg, const std::vector<CellResult>& cells) {
  std::ostringstream out;
  out << "optimizer             best_lr     median_steps_to_threshold  median_final_loss\n";
  for (OptimizerKind kind : cfg.optimizers) {
    // Tune per optimizer: fewest median steps to threshold, ties broken by
    // the smaller median final loss.
    long best_steps = -1;
    double best_loss = std::numeric_limits<double>::infinity();
    double best_lr = cfg.learning_rates.front();
    for (int li = 0; li < static_cast<int>(cfg.learning_rates.size()); ++li) {
      std::vector<const CellResult*> group;
      for (const auto& cell : cells)
        if (cell.optimizer == kind && cell.lr_index == li) group.push_back(&cell);
      const GroupStats stats = group_stats(cfg, group);
      const long steps = stats.median_steps < 0 ? cfg.steps + 1 : stats.median_steps;
      const long current = best_steps < 0 ? cfg.steps + 1 : best_steps;
      if (steps < current || (steps == current && stats.median_final_loss < best_loss)) {
        best_steps = stats.median_steps;
        best_loss = stats.median_final_loss;
        best_lr = cfg.learning_rates[static_cast<std::size_t>(li)];
      }
    }
    const std::string steps_str = best_steps < 0 ? "never" : std::to_string(best_steps);
    char line[160];
    std::snprintf(line, sizeof(line), "%-20s  %-10s  %-25s  %s\n", optimizer_kind_name(kind),
                  format_double_short(best_lr).c_str(), steps_str.c_str(),
                  format_double_short(best_loss).c_str());
    out << line;
  }
  return out.str();
}

std::string write_run_outputs(const RunConfig& cfg, const std::vector<CellResult>& cells,
                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + out_dir + "'");

  for (const auto& cell : cells) {
    const fs::path path = fs::path(out_dir) / cell_csv_filename(cell);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << cell_csv_text(cfg, cell);
  }
  const fs::path summary_path = fs::path(out_dir) / "summary.csv";
  std::ofstream summary(summary_path, std::ios::binary);
  if (!summary) throw std::runtime_error("cannot write '" + summary_path.string() + "'");
  summary << summary_csv_text(cfg, cells);
  return summary_table_text(cfg, cells);
}

}  // namespace adaprelora
