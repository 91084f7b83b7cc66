// Command-line driver for the adaprelora shared library. Talks to the core
// exclusively through the C API in adaprelora.h.
//
// Exit codes: 0 = success, 1 = verification failure, 2 = config error.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "adaprelora.h"

namespace {

void print_line(const char* line, void* /*user*/) { std::printf("%s\n", line); }

int status_to_exit_code(apl_status status) {
  switch (status) {
    case APL_OK:
      return 0;
    case APL_ERROR_VERIFY_FAILED:
      return 1;
    case APL_ERROR_CONFIG:
    case APL_ERROR_IO:
      return 2;
    default:
      return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preconditioned low-rank factor optimizer benchmarks and verification"};
  app.set_version_flag("--version", std::string(apl_version()));
  app.fallthrough();

  std::string out_dir = "runs";
  int threads = 1;
  app.add_option("--out", out_dir, "Output directory for CSV trajectories");
  app.add_option("--threads", threads, "Worker threads for grid cells")
      ->check(CLI::PositiveNumber);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "Run the benchmark grid from a config file");
  run->add_option("config", config_path, "Path to the run config")->required();

  bool full = false;
  CLI::App* verify = app.add_subcommand("verify", "Run the property verification suites");
  verify->add_flag("--full", full, "200 seeds per property instead of 20");

  app.require_subcommand(0, 1);
  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    char errbuf[512] = {0};
    const apl_status status = apl_run_config(config_path.c_str(), out_dir.c_str(), threads,
                                             print_line, nullptr, errbuf, sizeof(errbuf));
    if (status != APL_OK)
      std::fprintf(stderr, "error: %s%s%s\n", apl_status_message(status),
                   errbuf[0] ? ": " : "", errbuf);
    return status_to_exit_code(status);
  }

  if (verify->parsed()) {
    const apl_status status = apl_verify(full ? 1 : 0, print_line, nullptr);
    if (status != APL_OK) std::fprintf(stderr, "error: %s\n", apl_status_message(status));
    return status_to_exit_code(status);
  }

  std::printf("%s\n", app.help().c_str());
  return 0;
}
