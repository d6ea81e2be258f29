#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fedsim/client.hpp"
#include "fedsim/data.hpp"
#include "fedsim/duration.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"
#include "fedsim/server.hpp"

namespace fedsim {

struct SimConfig {
  int concurrency = 10;  // M clients training at any instant
  DurationDist duration_dist = DurationDist::half_normal(1.25);
  std::int64_t update_budget = 50000;  // total client updates to spend
  std::int64_t tau_max = -1;           // bounded-delay cutoff; < 0 = unlimited
  double overselection_factor = 1.0;   // sync rounds only
  double eval_every = 1.0;             // sim-time between eval rows
  std::uint64_t seed = 0;
  // Offsets the i-th initial start to time i/M instead of starting all
  // clients at once; useful for phase-shifted staleness scenarios.
  bool stagger_initial_starts = false;
  // Scales a client's drawn duration by its dataset size relative to the
  // federation mean, coupling compute time to data volume.
  bool duration_scales_with_data = false;
};

// Optional per-flush hook (step value after the flush, current model).
// Observers must not mutate anything; used by trajectory-comparison tests.
using StepObserver =
    std::function<void(std::int64_t step, const ModelParams& model)>;

// Asynchronous engine: M clients train concurrently; each finish stages its
// delta into the buffer (or is rejected as over-stale), a flush runs when
// the buffer fills, and the freed slot is refilled immediately by a client
// sampled uniformly among those not currently training.
MetricsLog run_async(const SimConfig& sim_cfg, const StrategyConfig& strategy,
                     const LocalConfig& local,
                     const std::vector<ClientDataset>& federation,
                     const EvalSet& eval_set, const ModelParams& model0,
                     const StepObserver& observer = {});

// Synchronous engine: per round, ceil(overselection_factor * M) distinct
// clients are selected, the fastest M train and aggregate, the rest are
// discarded stragglers (still charged against the budget); the round costs
// the M-th smallest duration in wall-clock.
MetricsLog run_sync(const SimConfig& sim_cfg, const StrategyConfig& strategy,
                    const LocalConfig& local,
                    const std::vector<ClientDataset>& federation,
                    const EvalSet& eval_set, const ModelParams& model0,
                    const StepObserver& observer = {});

// tau = apply_version - pull_version; negative gaps are protocol errors.
std::int64_t compute_staleness(std::int64_t pull_version,
                               std::int64_t apply_version);

// Distribution of accepted-update staleness, bins of `bin_width` steps.
Histogram staleness_histogram(const MetricsLog& log, double bin_width);

}  // namespace fedsim
