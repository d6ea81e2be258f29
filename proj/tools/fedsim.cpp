#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/harness.hpp"

namespace {

struct Overrides {
  CLI::Option* seed_opt = nullptr;
  CLI::Option* budget_opt = nullptr;
  std::uint64_t seed = 0;
  std::int64_t budget = 0;
  std::string out_dir;
};

void add_common(CLI::App* cmd, std::string& config_path, Overrides& ov) {
  cmd->add_option("config", config_path, "config file (key=value lines)")
      ->required();
  ov.seed_opt = cmd->add_option("--seed", ov.seed, "override sim.seed");
  ov.budget_opt = cmd->add_option("--budget-updates", ov.budget,
                                  "override sim.budget_updates");
  cmd->add_option("--out-dir", ov.out_dir,
                  "directory for output files (created if missing)");
}

fedsim::RunConfig load_with_overrides(const std::string& path,
                                      const Overrides& ov) {
  fedsim::RunConfig cfg = fedsim::parse_config_file(path);
  if (ov.seed_opt->count() > 0) cfg.sim.seed = ov.seed;
  if (ov.budget_opt->count() > 0) cfg.sim.update_budget = ov.budget;
  if (!ov.out_dir.empty()) {
    std::filesystem::create_directories(ov.out_dir);
    cfg.output = (std::filesystem::path(ov.out_dir) /
                  std::filesystem::path(cfg.output).filename())
                     .string();
  }
  cfg.validate();
  return cfg;
}

std::string render_wallclock(const fedsim::TargetResult& r) {
  switch (r.status) {
    case fedsim::TargetResult::Status::reached: {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.6g", r.sim_time);
      return buf;
    }
    case fedsim::TargetResult::Status::not_reached: return "not reached";
    case fedsim::TargetResult::Status::diverged: return "diverged";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fedsim: deterministic simulator for buffered asynchronous "
               "federated learning"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides ov;
  int parallelism =
      std::max(1, static_cast<int>(std::thread::hardware_concurrency()));

  CLI::App* cmd_run = app.add_subcommand("run", "execute a single run");
  add_common(cmd_run, config_path, ov);

  Overrides ov_sweep;
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "run the config's parameter grid");
  add_common(cmd_sweep, config_path, ov_sweep);
  cmd_sweep->add_option("--parallelism", parallelism,
                        "max sweep points in flight");

  Overrides ov_cmp;
  CLI::App* cmd_compare = app.add_subcommand(
      "compare", "run all five strategies under one timing model");
  add_common(cmd_compare, config_path, ov_cmp);

  Overrides ov_val;
  CLI::App* cmd_validate =
      app.add_subcommand("validate", "parse and check a config, run nothing");
  add_common(cmd_validate, config_path, ov_val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (cmd_validate->parsed()) {
      fedsim::RunConfig cfg = load_with_overrides(config_path, ov_val);
      std::cout << "ok: " << config_path << " ("
                << fedsim::effective_config(cfg).size() << " effective keys)\n";
      return 0;
    }
    if (cmd_run->parsed()) {
      fedsim::RunConfig cfg = load_with_overrides(config_path, ov);
      fedsim::RunResult r = fedsim::execute_run(cfg);
      std::cout << "wrote " << cfg.output << "\n"
                << "updates_to_target="
                << fedsim::render_target(r.updates, cfg.sim.update_budget)
                << " wallclock_to_target=" << render_wallclock(r.wallclock)
                << " final_accuracy=" << r.final_accuracy << "\n";
      return 0;
    }
    if (cmd_sweep->parsed()) {
      fedsim::RunConfig cfg = load_with_overrides(config_path, ov_sweep);
      fedsim::SweepReport report = fedsim::run_sweep(cfg, parallelism);
      std::cout << fedsim::format_sweep_report(report);
      return 0;
    }
    fedsim::RunConfig cfg = load_with_overrides(config_path, ov_cmp);
    std::vector<fedsim::CompareRow> rows = fedsim::compare_strategies(cfg);
    std::cout << fedsim::format_compare_table(rows, cfg.sim.update_budget);
    return 0;
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
