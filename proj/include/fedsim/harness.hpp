#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"
#include "fedsim/sim.hpp"

namespace fedsim {

// Everything a run needs besides its config: the per-client training shards,
// the pooled held-out eval set, the resolved model layout and the initial
// parameters. Built once and shared when several runs must see the exact
// same task (strategy comparisons, sweeps that only touch run knobs).
struct PreparedTask {
  std::vector<ClientDataset> train;
  EvalSet eval;
  ModelLayout layout;
  ModelParams model0;
};

PreparedTask prepare_task(const RunConfig& cfg);

struct RunResult {
  MetricsLog log;
  TargetResult updates;
  TargetResult wallclock;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
};

// One full run: build (or reuse) the task, simulate, stamp metadata and
// write the CSV plus its .meta sidecar to cfg.output.
RunResult execute_run(RunConfig cfg);
RunResult execute_run(RunConfig cfg, const PreparedTask& task);

struct SweepPoint {
  std::size_t index = 0;
  std::map<std::string, std::string> assignment;
  std::uint64_t seed = 0;
  TargetResult updates;
  double final_accuracy = 0.0;
  std::string output;
  std::string error;  // nonempty when the point threw instead of finishing
};

struct SweepReport {
  std::vector<SweepPoint> points;  // ranked, best point first
  std::int64_t budget = 0;
};

// Cartesian product over base.sweep. Every point runs with a seed forked
// from base.sim.seed and writes <output stem>_pNNN.csv; up to `parallelism`
// points execute at once. A point that throws is recorded and ranked last,
// the sweep itself keeps going.
SweepReport run_sweep(const RunConfig& base, int parallelism);

std::string format_sweep_report(const SweepReport& report);

struct CompareRow {
  StrategyKind kind = StrategyKind::fedbuff;
  TargetResult updates;
  TargetResult wallclock;
  double final_accuracy = 0.0;
  std::string output;
};

// Runs all five strategies on one shared task and timing model. Only the
// strategy block varies (momentum for fedavgm, the proximal term for
// fedprox); outputs land at <output stem>_<strategy>.csv.
std::vector<CompareRow> compare_strategies(const RunConfig& cfg);

std::string format_compare_table(const std::vector<CompareRow>& rows,
                                 std::int64_t budget);

}  // namespace fedsim
