// Command-line front end: simulate / verify / sweep / classify.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "lohe/cli.hpp"
#include "lohe/verify.hpp"

namespace {

void print_state_line(std::ostream& os, const lohe::AsymptoticState& st) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "verdict=%s bipolar_n=%d R=%.12g diameter=%.12g",
                lohe::verdict_name(st.verdict), st.bipolar_n, st.final_r, st.final_diameter);
  os << buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and verifier for the Lohe aggregation hierarchy"};
  app.require_subcommand(1);

  std::string config_path, output_dir, mask_str, snapshot_path, suite = "all";
  double tol = 0.0, kappa_min = 0.0, kappa_max = 1.0;
  int steps = 5, threads = 0;
  std::uint64_t seed = 0;

  auto* simulate = app.add_subcommand("simulate", "integrate one configuration and write outputs");
  simulate->add_option("-c,--config", config_path, "run configuration (json)")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("-o,--output", output_dir, "override outputs.directory");
  auto* seed_opt = simulate->add_option("--seed", seed, "override the configured seed");

  auto* verify = app.add_subcommand("verify", "run built-in identity checks");
  verify->add_option("--suite", suite,
                     "conservation|splitting|kuramoto|flux|bridge|equivalence|all");
  verify->add_option("--tol", tol, "override every tolerance in the suite");

  auto* sweep = app.add_subcommand("sweep", "rerun a configuration across coupling strengths");
  sweep->add_option("-c,--config", config_path, "run configuration (json)")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--mask", mask_str, "coupling mask to scan, e.g. 0 or 01")->required();
  sweep->add_option("--min", kappa_min, "first kappa")->required();
  sweep->add_option("--max", kappa_max, "last kappa")->required();
  sweep->add_option("--steps", steps, "number of kappa values");
  sweep->add_option("--threads", threads, "fan-out width (0 reads LOHE_THREADS, default 1)");
  sweep->add_option("-o,--output", output_dir, "directory for sweep.csv");

  auto* classify = app.add_subcommand("classify", "classify a saved ensemble snapshot");
  classify->add_option("-s,--snapshot", snapshot_path, "snapshot file")
      ->required()
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      auto cfg = lohe::cli::load_run_config(config_path);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      if (seed_opt->count() > 0) cfg.params.seed = seed;
      const auto outcome = lohe::cli::run_simulation(cfg);
      lohe::cli::write_outputs(cfg, outcome);
      print_state_line(std::cout, outcome.state);
      char buf[64];
      std::snprintf(buf, sizeof(buf), " wall=%.3gs -> %s", outcome.wall_seconds,
                    cfg.output_dir.c_str());
      std::cout << buf << '\n';
      return 0;
    }
    if (*verify) {
      const auto results = lohe::cli::run_verify(suite, tol);
      lohe::cli::print_verify_results(std::cout, results);
      return lohe::cli::all_passed(results) ? 0 : 1;
    }
    if (*sweep) {
      auto cfg = lohe::cli::load_run_config(config_path);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      const auto rows = lohe::cli::run_sweep(cfg, lohe::Bitmask::from_string(mask_str), kappa_min,
                                             kappa_max, steps, threads);
      std::filesystem::create_directories(cfg.output_dir);
      const auto path = std::filesystem::path(cfg.output_dir) / "sweep.csv";
      std::ofstream os(path);
      if (!os) throw lohe::usage_error("sweep: cannot write " + path.string());
      lohe::cli::write_sweep_csv(os, rows);
      std::cout << "wrote " << rows.size() << " rows -> " << path.string() << '\n';
      return 0;
    }
    if (*classify) {
      const auto agents = lohe::cli::load_ensemble(snapshot_path);
      const std::vector<std::vector<lohe::ComplexTensor>> tail{agents};
      print_state_line(std::cout, lohe::classify_state(tail));
      std::cout << '\n';
      return 0;
    }
  } catch (const lohe::numeric_error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
