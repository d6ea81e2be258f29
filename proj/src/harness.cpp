#include "fedsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

#ifndef FEDSIM_BUILD_ID
#define FEDSIM_BUILD_ID "unknown"
#endif

namespace fedsim {

namespace {

// Fork label for the initial-model stream under the data seed; any value
// comfortably above plausible client counts avoids the per-client labels.
constexpr std::uint64_t kModelInitLabel = 0x6d6f64656cULL;

std::string with_suffix(const std::string& output, const std::string& tag) {
  std::filesystem::path p(output);
  std::filesystem::path ext = p.extension();
  if (ext.empty()) ext = ".csv";
  std::filesystem::path out = p.parent_path() / (p.stem().string() + tag);
  out += ext;
  return out.string();
}

std::string real_brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

PreparedTask prepare_task(const RunConfig& cfg) {
  PreparedTask task;
  std::vector<ClientDataset> federation;
  if (cfg.source == DataSource::synthetic) {
    federation = generate_federation(cfg.federation);
    task.layout = cfg.model_layout();
  } else {
    federation =
        load_csv_federation(cfg.csv_path, cfg.csv_feature_columns,
                            cfg.csv_label_column, cfg.csv_client_column);
    task.layout.kind = cfg.model_kind;
    task.layout.feature_dim = static_cast<int>(cfg.csv_feature_columns.size());
    int max_label = 0;
    for (const auto& shard : federation) {
      for (const auto& ex : shard.examples) {
        max_label = std::max(max_label, ex.label);
      }
    }
    task.layout.num_classes = std::max(2, max_label + 1);
    task.layout.hidden_dim =
        cfg.model_kind == ModelKind::mlp ? cfg.hidden_dim : 0;
  }

  auto [train, eval_pool] =
      train_eval_split(federation, cfg.eval_fraction, cfg.federation.seed);
  if (eval_pool.empty()) {
    throw ConfigError(
        "eval pool is empty; increase data.eval_fraction or client sizes");
  }
  task.train = std::move(train);
  task.eval = EvalSet::from_examples(eval_pool);

  PrngStream init_rng = PrngStream(cfg.federation.seed).fork(kModelInitLabel);
  task.model0 = init_model(task.layout, init_rng);
  return task;
}

RunResult execute_run(RunConfig cfg) {
  cfg.validate();
  PreparedTask task = prepare_task(cfg);
  return execute_run(std::move(cfg), task);
}

RunResult execute_run(RunConfig cfg, const PreparedTask& task) {
  cfg.validate();
  RunResult result;
  if (is_async(cfg.strategy.kind)) {
    result.log = run_async(cfg.sim, cfg.strategy, cfg.local, task.train,
                           task.eval, task.model0);
  } else {
    result.log = run_sync(cfg.sim, cfg.strategy, cfg.local, task.train,
                          task.eval, task.model0);
  }
  result.log.metadata = effective_config(cfg);
  result.log.metadata["build.id"] = FEDSIM_BUILD_ID;
  emit_csv(result.log, cfg.output);
  result.updates = updates_to_target(result.log, cfg.target_accuracy);
  result.wallclock = wallclock_to_target(result.log, cfg.target_accuracy);
  if (!result.log.rows.empty()) {
    result.final_accuracy = result.log.rows.back().accuracy;
    result.final_loss = result.log.rows.back().loss;
  }
  return result;
}

SweepReport run_sweep(const RunConfig& base_in, int parallelism) {
  RunConfig base = base_in;
  base.validate();
  if (base.sweep.empty()) throw ConfigError("sweep grid is empty");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");

  std::vector<std::string> keys;
  std::vector<std::vector<std::string>> values;
  for (const auto& [k, v] : base.sweep) {
    if (v.empty()) throw ConfigError("sweep." + k + " has no values");
    keys.push_back(k);
    values.push_back(v);
  }

  std::size_t total = 1;
  for (const auto& v : values) total *= v.size();

  // A point may only reuse the shared task if the grid never touches how
  // that task is built.
  bool task_shared = true;
  for (const auto& k : keys) {
    if (k.rfind("data.", 0) == 0 || k.rfind("model.", 0) == 0) {
      task_shared = false;
    }
  }

  PreparedTask shared;
  if (task_shared) shared = prepare_task(base);

  SweepReport report;
  report.budget = base.sim.update_budget;
  report.points.resize(total);

  PrngStream seed_root(base.sim.seed);
  std::vector<std::size_t> odo(keys.size(), 0);
  for (std::size_t i = 0; i < total; ++i) {
    SweepPoint& pt = report.points[i];
    pt.index = i;
    for (std::size_t d = 0; d < keys.size(); ++d) {
      pt.assignment[keys[d]] = values[d][odo[d]];
    }
    pt.seed = seed_root.fork(i).next_u64();
    char tag[24];
    std::snprintf(tag, sizeof tag, "_p%03zu", i);
    pt.output = with_suffix(base.output, tag);
    // Odometer increment, last key fastest.
    for (std::size_t d = keys.size(); d-- > 0;) {
      if (++odo[d] < values[d].size()) break;
      odo[d] = 0;
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      SweepPoint& pt = report.points[i];
      try {
        RunConfig cfg = base;
        cfg.sweep.clear();
        for (const auto& [k, v] : pt.assignment) apply_config_entry(cfg, k, v);
        cfg.sim.seed = pt.seed;
        cfg.output = pt.output;
        cfg.validate();
        RunResult r = task_shared ? execute_run(cfg, shared) : execute_run(cfg);
        pt.updates = r.updates;
        pt.final_accuracy = r.final_accuracy;
      } catch (const std::exception& e) {
        pt.error = e.what();
      }
    }
  };

  const int workers =
      static_cast<int>(std::min<std::size_t>(parallelism, total));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  auto rank = [](const SweepPoint& p) {
    if (!p.error.empty()) return 3;
    switch (p.updates.status) {
      case TargetResult::Status::reached: return 0;
      case TargetResult::Status::not_reached: return 1;
      case TargetResult::Status::diverged: return 2;
    }
    return 3;
  };
  std::sort(report.points.begin(), report.points.end(),
            [&](const SweepPoint& a, const SweepPoint& b) {
              const int ra = rank(a), rb = rank(b);
              if (ra != rb) return ra < rb;
              if (ra == 0 && a.updates.updates != b.updates.updates) {
                return a.updates.updates < b.updates.updates;
              }
              if (ra == 1 && a.final_accuracy != b.final_accuracy) {
                return a.final_accuracy > b.final_accuracy;
              }
              return a.index < b.index;
            });
  return report;
}

std::string format_sweep_report(const SweepReport& report) {
  std::ostringstream out;
  out << "rank  updates_to_target  final_acc  point\n";
  int rank = 1;
  for (const auto& pt : report.points) {
    char head[64];
    if (!pt.error.empty()) {
      std::snprintf(head, sizeof head, "%-4d  %-17s  %-9s  ", rank, "error",
                    "-");
    } else {
      std::snprintf(head, sizeof head, "%-4d  %-17s  %-9s  ", rank,
                    render_target(pt.updates, report.budget).c_str(),
                    real_brief(pt.final_accuracy).c_str());
    }
    out << head;
    bool first = true;
    for (const auto& [k, v] : pt.assignment) {
      if (!first) out << ' ';
      out << k << '=' << v;
      first = false;
    }
    if (!pt.error.empty()) out << "  [" << pt.error << "]";
    out << '\n';
    ++rank;
  }
  return out.str();
}

std::vector<CompareRow> compare_strategies(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  cfg.validate();
  const PreparedTask task = prepare_task(cfg);

  const StrategyKind order[] = {StrategyKind::fedbuff, StrategyKind::fedasync,
                                StrategyKind::fedavg, StrategyKind::fedavgm,
                                StrategyKind::fedprox};
  std::vector<CompareRow> rows;
  for (StrategyKind kind : order) {
    RunConfig c = cfg;
    c.strategy.kind = kind;
    c.strategy.momentum =
        kind == StrategyKind::fedavgm ? cfg.compare_momentum : 0.0;
    c.local.prox_mu = kind == StrategyKind::fedprox ? cfg.compare_prox_mu : 0.0;
    if (!is_async(kind)) c.strategy.staleness_alpha = 0.0;
    c.output = with_suffix(cfg.output, "_" + to_string(kind));
    c.validate();

    RunResult r = execute_run(c, task);
    CompareRow row;
    row.kind = kind;
    row.updates = r.updates;
    row.wallclock = r.wallclock;
    row.final_accuracy = r.final_accuracy;
    row.output = c.output;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_compare_table(const std::vector<CompareRow>& rows,
                                 std::int64_t budget) {
  std::ostringstream out;
  out << "strategy  updates_to_target  wallclock_to_target  final_acc\n";
  for (const auto& row : rows) {
    std::string wall;
    switch (row.wallclock.status) {
      case TargetResult::Status::reached:
        wall = real_brief(row.wallclock.sim_time);
        break;
      case TargetResult::Status::not_reached: wall = "not reached"; break;
      case TargetResult::Status::diverged: wall = "diverged"; break;
    }
    char line[128];
    std::snprintf(line, sizeof line, "%-8s  %-17s  %-19s  %s\n",
                  to_string(row.kind).c_str(),
                  render_target(row.updates, budget).c_str(), wall.c_str(),
                  real_brief(row.final_accuracy).c_str());
    out << line;
  }
  return out.str();
}

}  // namespace fedsim
