// Command-line front-end: run campaigns, list registries, print the
// uncontrolled Lorenz reward levels.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pbo/harness.hpp"

namespace {

int cmd_list() {
  std::cout << "problems:";
  for (const auto& p : pbo::harness::problem_names()) std::cout << ' ' << p;
  std::cout << "\noptimizers:";
  for (const auto& o : pbo::harness::optimizer_names()) std::cout << ' ' << o;
  std::cout << '\n';
  return 0;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            std::optional<int> runs, std::optional<std::string> out, int workers) {
  auto cfg = pbo::harness::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (runs) cfg.runs = *runs;
  if (out) cfg.output_dir = *out;
  cfg.validate();

  const auto logs = pbo::harness::run_experiment(cfg, workers);
  std::cout.precision(10);
  for (const auto& log : logs) {
    std::cout << "seed " << log.seed << " best " << log.best_cost << " at (";
    for (Eigen::Index i = 0; i < log.best_point.size(); ++i)
      std::cout << (i ? ", " : "") << log.best_point[i];
    std::cout << ")\n";
  }
  std::cout << "median final best " << pbo::harness::median_best(logs, cfg.generations - 1)
            << " over " << logs.size() << " run(s)\n";
  if (!cfg.output_dir.empty()) std::cout << "wrote " << cfg.output_dir << '\n';
  return 0;
}

int cmd_baseline(std::optional<std::string> out) {
  const auto b = pbo::harness::lorenz_baseline();
  std::cout << "stabilizer_reward " << b.stabilizer << "\noscillator_reward " << b.oscillator
            << '\n';
  if (out) {
    std::filesystem::create_directories(*out);
    const auto path = std::filesystem::path(*out) / "uncontrolled_trajectory.csv";
    pbo::harness::write_file(path, [&](std::ostream& os) {
      pbo::lorenz::write_trajectory_csv(os, b.trajectory);
    });
    std::cout << "wrote " << path.string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy-based black-box optimization with ES and CMA-ES baselines"};
  app.require_subcommand(1);

  int workers = 1;
  app.add_option("--workers", workers, "Worker threads (wall time only, never results)")
      ->check(CLI::PositiveNumber);

  auto* list = app.add_subcommand("list", "List problems and optimizers");

  auto* run = app.add_subcommand("run", "Execute a campaign described by a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> out;
  run->add_option("--config", config_path, "Campaign config (JSON)")->required();
  run->add_option("--seed", seed, "Master seed (run k uses seed + k)");
  run->add_option("--runs", runs, "Number of independent runs");
  run->add_option("--out", out, "Output directory for CSV files");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* baseline = app.add_subcommand("baseline", "Uncontrolled Lorenz reward levels");
  std::optional<std::string> baseline_out;
  baseline->add_option("--out", baseline_out, "Directory for the uncontrolled trajectory CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*list) return cmd_list();
    if (*run) return cmd_run(config_path, seed, runs, out, workers);
    if (*baseline) return cmd_baseline(baseline_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
