#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fedsim {

// One evaluation snapshot. client_updates counts all compute spent so far:
// buffer insertions, rejected-stale deliveries, and synchronous selections
// including over-selection discards.
struct EvalRow {
  double sim_time = 0.0;
  std::int64_t server_step = 0;
  std::int64_t client_updates = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  double mean_staleness = 0.0;  // over accepted updates since the last row
  std::int64_t rejected = 0;    // cumulative
};

// Full provenance of one asynchronous client task; enough for an external
// replay to re-derive every staleness value from scratch.
struct TaskRecord {
  std::int64_t client_id = 0;
  double start_time = 0.0;
  double finish_time = 0.0;
  std::int64_t pull_version = 0;
  std::int64_t tau = 0;
  bool accepted = true;
};

struct FlushRecord {
  double time = 0.0;
  std::int64_t step = 0;  // step value after this flush
};

enum class RunOutcome { completed, diverged };

struct MetricsLog {
  std::vector<EvalRow> rows;
  std::vector<TaskRecord> tasks;    // async runs only
  std::vector<FlushRecord> flushes;  // one per server step, sync rounds too
  std::int64_t buffer_insertions = 0;
  std::int64_t rejected_updates = 0;
  std::int64_t sync_selected = 0;   // includes discarded stragglers
  std::int64_t sync_discarded = 0;
  RunOutcome outcome = RunOutcome::completed;
  std::map<std::string, std::string> metadata;

  // Total compute the run consumed; matches the final row's client_updates.
  std::int64_t work_total() const {
    return buffer_insertions + rejected_updates + sync_selected;
  }
};

struct TargetResult {
  enum class Status { reached, not_reached, diverged };
  Status status = Status::not_reached;
  std::int64_t updates = 0;  // valid when reached
  double sim_time = 0.0;     // valid when reached
};

// First eval row with accuracy >= target; client_updates there. Rows whose
// loss is non-finite or already past the divergence ceiling (1000x the
// first row's loss) never qualify, since accuracy alone cannot tell a
// trained model from an exploded one. A diverged run that never reached
// the target reports the diverged sentinel.
TargetResult updates_to_target(const MetricsLog& log, double target_accuracy);

// Same detection, but reports when the winning model came into existence:
// the flush that produced the qualifying row's server step.
TargetResult wallclock_to_target(const MetricsLog& log, double target_accuracy);

// Render a TargetResult for tables: count, ">budget" or "diverged".
std::string render_target(const TargetResult& r, std::int64_t budget);

// CSV with exactly these columns:
//   sim_time,server_step,client_updates,accuracy,loss,mean_staleness,rejected
// Reals carry 17 significant digits so parsing them back is bit-exact. A
// sidecar file (same stem, .meta suffix) holds metadata as key=value lines.
// Both files are written atomically (temp file, then rename).
void emit_csv(const MetricsLog& log, const std::string& path);

// Parse a file produced by emit_csv (rows only; metadata is not read back).
MetricsLog load_csv(const std::string& path);

struct Histogram {
  double bin_width = 1.0;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
};

}  // namespace fedsim
