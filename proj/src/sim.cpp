#include "fedsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <queue>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

// Stream labels under the run's root seed. Selection, durations and local
// training draw from disjoint forks so the engines stay draw-aligned (the
// sync and async paths must consume selection randomness identically for
// the reduction-identity property to hold).
enum : std::uint64_t { kSelection = 1, kDurations = 2, kTraining = 3 };

// Uniform sampling without replacement among clients not currently
// training, O(1) per operation. The pool keeps available clients in a
// prefix; busy ones are parked in the suffix.
class ClientSampler {
 public:
  explicit ClientSampler(std::size_t m) : pool_(m), pos_(m), available_(m) {
    std::iota(pool_.begin(), pool_.end(), 0);
    std::iota(pos_.begin(), pos_.end(), 0);
  }

  std::size_t available() const { return available_; }

  std::int64_t sample(PrngStream& rng) {
    if (available_ == 0) throw ProtocolError("no idle client to sample");
    const auto i =
        static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(available_)));
    const std::int64_t client = pool_[i];
    move_to(i, available_ - 1);
    --available_;
    return client;
  }

  void release(std::int64_t client) {
    const std::size_t i = pos_[static_cast<std::size_t>(client)];
    if (i < available_) throw ProtocolError("released an idle client");
    move_to(i, available_);
    ++available_;
  }

 private:
  void move_to(std::size_t from, std::size_t to) {
    std::swap(pool_[from], pool_[to]);
    pos_[static_cast<std::size_t>(pool_[from])] = from;
    pos_[static_cast<std::size_t>(pool_[to])] = to;
  }

  std::vector<std::int64_t> pool_;
  std::vector<std::size_t> pos_;
  std::size_t available_;
};

enum class EventKind : int { finish = 0, start = 1, eval = 2 };

struct Event {
  double time;
  EventKind kind;
  std::int64_t client_id;  // -1 when not yet determined (start, eval)
  std::uint64_t seq;
  std::size_t task;  // finish events: index into the task table
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.kind != b.kind) return a.kind > b.kind;
    if (a.client_id != b.client_id) return a.client_id > b.client_id;
    return a.seq > b.seq;
  }
};

struct InFlight {
  std::int64_t client_id;
  double start_time;
  std::int64_t pull_version;
  ClientUpdate update;
};

void check_common(const SimConfig& sim, int needed_clients,
                  std::size_t federation_size) {
  if (sim.concurrency < 1) throw ConfigError("concurrency must be >= 1");
  if (sim.update_budget < 0) throw ConfigError("update budget must be >= 0");
  if (!(sim.eval_every > 0.0)) throw ConfigError("eval_every must be > 0");
  if (federation_size < static_cast<std::size_t>(needed_clients)) {
    throw ConfigError("federation has " + std::to_string(federation_size) +
                      " clients but the run needs " +
                      std::to_string(needed_clients));
  }
}

double mean_client_size(const std::vector<ClientDataset>& federation) {
  double total = 0;
  for (const auto& ds : federation) {
    total += static_cast<double>(ds.examples.size());
  }
  return total / static_cast<double>(federation.size());
}

// Shared evaluation/divergence bookkeeping for both engines.
class EvalTracker {
 public:
  EvalTracker(const EvalSet& eval_set, MetricsLog& log)
      : eval_set_(eval_set), log_(log) {}

  void note_accepted(std::int64_t tau) {
    tau_sum_ += static_cast<double>(tau);
    ++tau_count_;
  }

  // Records a row; returns false when the run just diverged.
  bool record(double time, const ServerState& server, std::int64_t work) {
    const auto [acc, l] = evaluate(server.model(), eval_set_);
    EvalRow row;
    row.sim_time = time;
    row.server_step = server.step();
    row.client_updates = work;
    row.accuracy = acc;
    row.loss = l;
    row.mean_staleness = tau_count_ ? tau_sum_ / static_cast<double>(tau_count_) : 0.0;
    row.rejected = log_.rejected_updates;
    log_.rows.push_back(row);
    tau_sum_ = 0.0;
    tau_count_ = 0;
    if (initial_loss_ < 0.0) initial_loss_ = l;
    // NaN-proof: divergence is "not provably below the ceiling".
    const bool ok = std::isfinite(l) && l <= 1e3 * initial_loss_ &&
                    all_finite(server.model().flat);
    if (!ok) log_.outcome = RunOutcome::diverged;
    return ok;
  }

  double last_time() const {
    return log_.rows.empty() ? -1.0 : log_.rows.back().sim_time;
  }

 private:
  const EvalSet& eval_set_;
  MetricsLog& log_;
  double tau_sum_ = 0.0;
  std::int64_t tau_count_ = 0;
  double initial_loss_ = -1.0;
};

}  // namespace

std::int64_t compute_staleness(std::int64_t pull_version,
                               std::int64_t apply_version) {
  if (apply_version < pull_version) {
    throw ProtocolError("negative staleness: pulled at " +
                        std::to_string(pull_version) + ", applied at " +
                        std::to_string(apply_version));
  }
  return apply_version - pull_version;
}

MetricsLog run_async(const SimConfig& sim_cfg, const StrategyConfig& strategy,
                     const LocalConfig& local,
                     const std::vector<ClientDataset>& federation,
                     const EvalSet& eval_set, const ModelParams& model0,
                     const StepObserver& observer) {
  if (!is_async(strategy.kind)) {
    throw ConfigError("run_async requires fedbuff or fedasync");
  }
  const int m_concurrent = sim_cfg.concurrency;
  check_common(sim_cfg, m_concurrent, federation.size());
  if (strategy.kind == StrategyKind::fedbuff &&
      m_concurrent < strategy.buffer_size) {
    std::cerr << "warning: concurrency " << m_concurrent
              << " below buffer size " << strategy.buffer_size
              << "; flushes will stall on refills\n";
  }

  MetricsLog log;
  if (sim_cfg.update_budget == 0) return log;

  PrngStream root(sim_cfg.seed);
  PrngStream select_rng = root.fork(kSelection);
  PrngStream duration_rng = root.fork(kDurations);
  const PrngStream train_root = root.fork(kTraining);
  const double mean_size = mean_client_size(federation);

  ServerState server(model0);
  ClientSampler sampler(federation.size());
  std::vector<std::int64_t> participation(federation.size(), 0);
  std::vector<InFlight> tasks;

  std::priority_queue<Event, std::vector<Event>, EventAfter> queue;
  std::uint64_t seq = 0;
  std::int64_t delivered = 0;  // accepted + rejected deliveries
  std::int64_t started = 0;
  std::int64_t pending_starts = 0;

  const std::int64_t budget = sim_cfg.update_budget;
  auto want_more_starts = [&](std::int64_t active) {
    return started + pending_starts < budget &&
           active + pending_starts < m_concurrent;
  };

  std::int64_t active = 0;
  const auto initial =
      static_cast<std::int64_t>(std::min<std::int64_t>(m_concurrent, budget));
  for (std::int64_t i = 0; i < initial; ++i) {
    const double t0 = sim_cfg.stagger_initial_starts
                          ? static_cast<double>(i) / m_concurrent
                          : 0.0;
    queue.push(Event{t0, EventKind::start, -1, seq++, 0});
    ++pending_starts;
  }
  queue.push(Event{0.0, EventKind::eval, -1, seq++, 0});

  EvalTracker tracker(eval_set, log);
  double now = 0.0;
  bool aborted = false;

  while (!queue.empty() && !aborted) {
    const Event ev = queue.top();
    queue.pop();
    now = ev.time;
    switch (ev.kind) {
      case EventKind::start: {
        --pending_starts;
        const std::int64_t client = sampler.sample(select_rng);
        const auto& data = federation[static_cast<std::size_t>(client)];
        double d = sample_duration(sim_cfg.duration_dist, duration_rng);
        if (sim_cfg.duration_scales_with_data) {
          d *= static_cast<double>(data.examples.size()) / mean_size;
        }
        InFlight task;
        task.client_id = client;
        task.start_time = now;
        task.pull_version = server.step();
        PrngStream train_rng =
            train_root.fork(static_cast<std::uint64_t>(client))
                .fork(static_cast<std::uint64_t>(
                    participation[static_cast<std::size_t>(client)]++));
        try {
          task.update = local_train(server.model(), data, local, train_rng);
        } catch (const NumericalError&) {
          log.outcome = RunOutcome::diverged;
          aborted = true;
          break;
        }
        task.update.pull_version = task.pull_version;
        tasks.push_back(std::move(task));
        queue.push(Event{now + d, EventKind::finish, client, seq++,
                         tasks.size() - 1});
        ++active;
        ++started;
        break;
      }
      case EventKind::finish: {
        const InFlight& task = tasks[ev.task];
        const std::int64_t tau =
            compute_staleness(task.pull_version, server.step());
        const bool accepted = sim_cfg.tau_max < 0 || tau <= sim_cfg.tau_max;
        log.tasks.push_back(TaskRecord{task.client_id, task.start_time, now,
                                       task.pull_version, tau, accepted});
        if (accepted) {
          server.buffer_add(task.update, strategy, local.weighting,
                            server.step());
          ++log.buffer_insertions;
          tracker.note_accepted(tau);
          if (server.maybe_flush(strategy)) {
            log.flushes.push_back(FlushRecord{now, server.step()});
            if (observer) observer(server.step(), server.model());
          }
        } else {
          ++log.rejected_updates;
        }
        ++delivered;
        --active;
        sampler.release(task.client_id);
        while (want_more_starts(active)) {
          queue.push(Event{now, EventKind::start, -1, seq++, 0});
          ++pending_starts;
        }
        break;
      }
      case EventKind::eval: {
        if (!tracker.record(now, server, delivered)) {
          aborted = true;
          break;
        }
        if (delivered < budget) {
          queue.push(
              Event{now + sim_cfg.eval_every, EventKind::eval, -1, seq++, 0});
        }
        break;
      }
    }
  }

  if (!aborted && tracker.last_time() < now) {
    tracker.record(now, server, delivered);
  }
  return log;
}

MetricsLog run_sync(const SimConfig& sim_cfg, const StrategyConfig& strategy,
                    const LocalConfig& local,
                    const std::vector<ClientDataset>& federation,
                    const EvalSet& eval_set, const ModelParams& model0,
                    const StepObserver& observer) {
  if (is_async(strategy.kind)) {
    throw ConfigError("run_sync requires a synchronous strategy");
  }
  if (sim_cfg.overselection_factor < 1.0) {
    throw ConfigError("overselection_factor must be >= 1");
  }
  const int m_cohort = sim_cfg.concurrency;
  const auto n_sel = static_cast<std::int64_t>(
      std::ceil(sim_cfg.overselection_factor * m_cohort));
  check_common(sim_cfg, static_cast<int>(n_sel), federation.size());

  MetricsLog log;
  if (sim_cfg.update_budget == 0) return log;

  PrngStream root(sim_cfg.seed);
  PrngStream select_rng = root.fork(kSelection);
  PrngStream duration_rng = root.fork(kDurations);
  const PrngStream train_root = root.fork(kTraining);
  const double mean_size = mean_client_size(federation);

  ServerState server(model0);
  ClientSampler sampler(federation.size());
  std::vector<std::int64_t> participation(federation.size(), 0);
  EvalTracker tracker(eval_set, log);

  double now = 0.0;
  double next_eval = 0.0;
  std::int64_t work = 0;
  bool aborted = false;

  struct Selected {
    std::int64_t client_id;
    double duration;
  };

  while (work < sim_cfg.update_budget && !aborted) {
    std::vector<Selected> cohort;
    cohort.reserve(static_cast<std::size_t>(n_sel));
    for (std::int64_t i = 0; i < n_sel; ++i) {
      const std::int64_t client = sampler.sample(select_rng);
      double d = sample_duration(sim_cfg.duration_dist, duration_rng);
      if (sim_cfg.duration_scales_with_data) {
        d *= static_cast<double>(
                 federation[static_cast<std::size_t>(client)].examples.size()) /
             mean_size;
      }
      cohort.push_back(Selected{client, d});
    }
    // The round lasts until the M-th fastest participant finishes; slower
    // stragglers are cut (their compute still counts).
    std::vector<Selected> by_speed = cohort;
    std::sort(by_speed.begin(), by_speed.end(),
              [](const Selected& a, const Selected& b) {
                if (a.duration != b.duration) return a.duration < b.duration;
                return a.client_id < b.client_id;
              });
    const double round_end =
        now + by_speed[static_cast<std::size_t>(m_cohort - 1)].duration;

    // Cadence evals strictly inside the round see the pre-round model.
    while (next_eval < round_end && !aborted) {
      if (!tracker.record(next_eval, server, work)) aborted = true;
      next_eval += sim_cfg.eval_every;
    }
    if (aborted) break;

    std::vector<ClientUpdate> updates;
    updates.reserve(static_cast<std::size_t>(m_cohort));
    try {
      for (std::int64_t i = 0; i < m_cohort; ++i) {
        const std::int64_t client = by_speed[static_cast<std::size_t>(i)].client_id;
        const auto& data = federation[static_cast<std::size_t>(client)];
        PrngStream train_rng =
            train_root.fork(static_cast<std::uint64_t>(client))
                .fork(static_cast<std::uint64_t>(
                    participation[static_cast<std::size_t>(client)]++));
        ClientUpdate u = local_train(server.model(), data, local, train_rng);
        u.pull_version = server.step();
        updates.push_back(std::move(u));
      }
    } catch (const NumericalError&) {
      log.outcome = RunOutcome::diverged;
      aborted = true;
      break;
    }
    server.apply_sync_round(updates, strategy, local.weighting);
    now = round_end;
    log.flushes.push_back(FlushRecord{now, server.step()});
    if (observer) observer(server.step(), server.model());

    work += n_sel;
    log.sync_selected += n_sel;
    log.sync_discarded += n_sel - m_cohort;
    for (std::int64_t i = 0; i < m_cohort; ++i) tracker.note_accepted(0);

    // Release in client-id order so the sampler's arrangement is a pure
    // function of the sampled set, not of durations.
    std::vector<std::int64_t> freed;
    freed.reserve(cohort.size());
    for (const Selected& s : cohort) freed.push_back(s.client_id);
    std::sort(freed.begin(), freed.end());
    for (std::int64_t c : freed) sampler.release(c);

    if (next_eval == round_end) {
      if (!tracker.record(next_eval, server, work)) aborted = true;
      next_eval += sim_cfg.eval_every;
    }
  }

  if (!aborted && tracker.last_time() < now) {
    tracker.record(now, server, work);
  }
  return log;
}

Histogram staleness_histogram(const MetricsLog& log, double bin_width) {
  if (!(bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
  if (log.tasks.empty() && log.rows.empty()) {
    throw ConfigError("staleness histogram of an empty log");
  }
  Histogram h;
  h.bin_width = bin_width;
  for (const TaskRecord& t : log.tasks) {
    if (!t.accepted) continue;
    const auto bin = static_cast<std::size_t>(
        std::floor(static_cast<double>(t.tau) / bin_width));
    if (h.counts.size() <= bin) h.counts.resize(bin + 1, 0);
    ++h.counts[bin];
    ++h.total;
  }
  return h;
}

}  // namespace fedsim
