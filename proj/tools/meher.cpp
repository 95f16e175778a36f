#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "meher/errors.hpp"
#include "meher/lab/plots.hpp"
#include "meher/lab/report.hpp"
#include "meher/lab/runner.hpp"

namespace fs = std::filesystem;
using namespace meher;

namespace {

constexpr int kExitIncomplete = 1;
constexpr int kExitUsage = 2;

int cmd_validate(const std::string& path) {
  const lab::RunConfig config = lab::load_run_config(path);
  const auto cells = lab::expand_cells(config);
  std::cout << to_json(config).dump(2) << "\n"
            << cells.size() << " cells -> " << lab::resolve_output_dir(config.experiment.output_dir).string() << "\n";
  return 0;
}

int cmd_run(const std::string& path, int workers, const std::string& output) {
  lab::RunConfig config = lab::load_run_config(path);
  if (workers > 0) config.experiment.workers = workers;
  const fs::path dir = output.empty() ? lab::resolve_output_dir(config.experiment.output_dir) : fs::path(output);
  const auto records = lab::run_experiment(config, dir, config.experiment.workers, &std::cout);
  std::size_t good = 0;
  for (const auto& r : records) good += lab::succeeded(r.status);
  std::cout << good << "/" << records.size() << " cells completed or early-stopped in " << dir.string() << "\n";
  return good == records.size() ? 0 : kExitIncomplete;
}

int cmd_metrics(const fs::path& dir) {
  const auto groups = lab::collect_groups(lab::load_records(dir), dir, &std::cerr);
  const auto rows = lab::group_metrics(groups);
  std::ofstream out(dir / "metrics.csv", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "metrics.csv").string());
  metrics::write_metrics_csv(out, rows);
  metrics::write_metrics_csv(std::cout, rows);
  return 0;
}

int cmd_plot(const fs::path& dir, const std::string& grouping, const std::string& output) {
  const auto groups = lab::collect_groups(lab::load_records(dir), dir, &std::cerr);
  const auto rows = lab::group_metrics(groups);
  const fs::path out = output.empty() ? dir / "plots" : fs::path(output);
  for (const fs::path& p : lab::emit_plots(groups, rows, out, lab::parse_grouping(grouping))) {
    std::cout << p.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Goal-relabeling PPO experiments on 3D predator-prey tasks"};
  app.require_subcommand(1);

  std::string config_path;
  std::string results_dir;
  std::string output;
  std::string grouping = "s_ratio";
  int workers = 0;

  auto* run = app.add_subcommand("run", "Train every cell of a config");
  run->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-w,--workers", workers, "Override experiment.workers")->check(CLI::PositiveNumber);
  run->add_option("-o,--output", output, "Results directory (default: experiment.output_dir)");

  auto* plot = app.add_subcommand("plot", "Write SVG learning curves and M_c bars");
  plot->add_option("results", results_dir, "Results directory")->required()->check(CLI::ExistingDirectory);
  plot->add_option("-g,--group-by", grouping, "s_ratio or algorithm")->check(CLI::IsMember({"s_ratio", "algorithm"}));
  plot->add_option("-o,--output", output, "Plot directory (default: <results>/plots)");

  auto* met = app.add_subcommand("metrics", "Write metrics.csv (R_c, T_c, M_c per group)");
  met->add_option("results", results_dir, "Results directory")->required()->check(CLI::ExistingDirectory);

  auto* validate = app.add_subcommand("validate", "Parse a config and list its cells");
  validate->add_option("config", config_path, "Run config (JSON)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, workers, output);
    if (*plot) return cmd_plot(results_dir, grouping, output);
    if (*met) return cmd_metrics(results_dir);
    if (*validate) return cmd_validate(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIncomplete;
  }
  return kExitUsage;
}
