// Acceptance gate for the simulator. Twelve scenario checks, one PASS or
// FAIL line each, nonzero exit when anything fails. Run without arguments
// for the full suite, pass numbers for a subset ("acceptance 7 9"), add
// --verbose for per-grid detail on the trend checks.
//
// Checks 1-6, 11 and 12 are exact or statistical properties with pinned
// tolerances. Checks 7-10 reproduce scaled-down behavioral trends on a
// frozen synthetic federation; their budgets, accuracy target and
// learning-rate grids are constants below, fixed once from calibration
// runs on the frozen data seed. When a trend does not materialize the
// suite reports the failure rather than adapting.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/client.hpp"
#include "fedsim/config.hpp"
#include "fedsim/data.hpp"
#include "fedsim/duration.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/metrics.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/server.hpp"
#include "fedsim/sim.hpp"
#include "fedsim/vec.hpp"
#include "replay_oracle.hpp"

namespace {

using namespace fedsim;
namespace fs = std::filesystem;

// Exact-property tolerances.
constexpr double kCoordTol = 1e-12;  // per-coordinate model agreement
constexpr double kGradTol = 1e-5;    // worst relative error vs central differences
constexpr double kMeanTol = 0.02;    // sampler mean, relative
constexpr double kVarTol = 0.03;     // sampler variance, relative
constexpr double kMcSlack = 3.0;     // Monte Carlo standard-error multiplier

// Frozen benchmark federation shared by the trend checks (7-10). A small
// two-layer net over strongly skewed clients with little local data: from
// its random start the accuracy climbs over tens of server steps, so
// cohort size, learning-rate choice and staleness all leave visible marks
// on the updates-to-target counts the checks compare.
constexpr std::uint64_t kBenchSeed = 2027;
constexpr std::int64_t kBenchClients = 2000;
constexpr int kBenchDim = 10;
constexpr int kBenchClasses = 5;
constexpr int kBenchHidden = 16;
constexpr double kBenchSkew = 0.1;
constexpr double kBenchSeparation = 2.0;
constexpr std::int64_t kBenchMeanExamples = 12;
constexpr double kBenchSizeSigma = 0.8;
constexpr double kBenchEvalFraction = 0.1;

// Trend protocol: three simulation seeds and a 9-point log-spaced server
// learning-rate grid tuned independently per arm. The accuracy targets sit
// in different phases of the learning curve on purpose: the scaling check
// wants the noise-limited refinement zone near the 0.78 ceiling, the
// speedup checks want the late climb (deep enough that crossing takes
// several waves of arrivals, since within the first concurrent wave every
// strategy sees the same zero-staleness update stream), and the
// over-selection check wants a zone where round counts are stable enough
// for per-seed comparisons.
constexpr double kTargetScaling = 0.77;
constexpr double kTargetSpeedup = 0.775;
constexpr double kTargetOverselect = 0.75;
constexpr double kEtaOverPair = 10.0;  // stable-zone rate for the factor pair
constexpr int kGridPoints = 9;
constexpr std::array<std::uint64_t, 3> kSeeds = {1, 2, 3};
constexpr std::int64_t kRoundCap7 = 120;    // rounds per run in check 7
constexpr std::int64_t kBudget8 = 30000;    // updates per run in checks 8-9
constexpr std::int64_t kBudget10 = 9000;    // updates per run in check 10
constexpr std::int64_t kBudget10Over = 11700;  // same rounds at factor 1.3

constexpr std::int64_t kUnreached = std::numeric_limits<std::int64_t>::max();
constexpr double kInf = std::numeric_limits<double>::infinity();

double grid_eta(int k) { return std::pow(10.0, -2.0 + 0.5 * k); }

// Tasks are built through the harness path so that any acceptance run can
// be reproduced bit-for-bit with a `fedsim run` config carrying the same
// field values.
using Task = PreparedTask;

Task make_task(const FederationSpec& spec, double eval_fraction,
               ModelKind kind = ModelKind::logistic, int hidden = 0) {
  RunConfig cfg;
  cfg.federation = spec;
  cfg.eval_fraction = eval_fraction;
  cfg.model_kind = kind;
  cfg.hidden_dim = hidden;
  return prepare_task(cfg);
}

const Task& benchmark_task() {
  static const Task task = [] {
    FederationSpec spec;
    spec.num_clients = kBenchClients;
    spec.feature_dim = kBenchDim;
    spec.num_classes = kBenchClasses;
    spec.label_skew_alpha = kBenchSkew;
    spec.class_separation = kBenchSeparation;
    spec.mean_examples_per_client = kBenchMeanExamples;
    spec.size_lognormal_sigma = kBenchSizeSigma;
    spec.seed = kBenchSeed;
    return make_task(spec, kBenchEvalFraction, ModelKind::mlp, kBenchHidden);
  }();
  return task;
}

// Outcome of one run against the shared target: total client updates,
// server steps at the qualifying eval row, and the wall-clock time of the
// flush that produced the qualifying model. Unreached and diverged runs
// carry the sentinels.
struct RunScore {
  std::int64_t updates = kUnreached;
  std::int64_t steps = kUnreached;
  double wallclock = kInf;
};

RunScore score_log(const MetricsLog& log, double target) {
  RunScore s;
  const TargetResult u = updates_to_target(log, target);
  if (u.status != TargetResult::Status::reached) return s;
  s.updates = u.updates;
  s.wallclock = wallclock_to_target(log, target).sim_time;
  for (const EvalRow& row : log.rows) {
    if (row.client_updates == u.updates && row.accuracy >= target) {
      s.steps = row.server_step;
      break;
    }
  }
  return s;
}

double key_updates(const RunScore& s) {
  return s.updates == kUnreached ? kInf : static_cast<double>(s.updates);
}
double key_steps(const RunScore& s) {
  return s.steps == kUnreached ? kInf : static_cast<double>(s.steps);
}
double key_wallclock(const RunScore& s) { return s.wallclock; }

double median3(std::array<double, 3> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

// local_steps 0 keeps the one-pass protocol; a positive count switches the
// clients to that many reshuffled-cycling SGD steps per update.
LocalConfig make_local(int local_steps) {
  LocalConfig local;
  if (local_steps > 0) {
    local.mode = LocalMode::fixed_steps;
    local.steps = local_steps;
  }
  return local;
}

RunScore run_sync_arm(const Task& task, StrategyKind kind, int concurrency,
                      double eta, double factor, const DurationDist& dist,
                      std::uint64_t seed, std::int64_t budget,
                      double eval_every, double target, int local_steps = 0) {
  SimConfig sim;
  sim.concurrency = concurrency;
  sim.duration_dist = dist;
  sim.update_budget = budget;
  sim.overselection_factor = factor;
  sim.eval_every = eval_every;
  sim.seed = seed;
  StrategyConfig strat;
  strat.kind = kind;
  strat.buffer_size = concurrency;
  strat.eta_global = eta;
  strat.momentum = kind == StrategyKind::fedavgm ? 0.9 : 0.0;
  strat.aggregate_mode = AggregateMode::mean;
  const LocalConfig local = make_local(local_steps);
  const MetricsLog log =
      run_sync(sim, strat, local, task.train, task.eval, task.model0);
  return score_log(log, target);
}

RunScore run_async_arm(const Task& task, int concurrency, int buffer,
                       double eta, double alpha, const DurationDist& dist,
                       std::uint64_t seed, std::int64_t budget,
                       double eval_every, double target, int local_steps = 0) {
  SimConfig sim;
  sim.concurrency = concurrency;
  sim.duration_dist = dist;
  sim.update_budget = budget;
  sim.eval_every = eval_every;
  sim.seed = seed;
  StrategyConfig strat;
  strat.kind = buffer == 1 ? StrategyKind::fedasync : StrategyKind::fedbuff;
  strat.buffer_size = buffer;
  strat.eta_global = eta;
  strat.staleness_alpha = alpha;
  const LocalConfig local = make_local(local_steps);
  const MetricsLog log =
      run_async(sim, strat, local, task.train, task.eval, task.model0);
  return score_log(log, target);
}

struct TunedArm {
  double eta = 0.0;
  std::array<RunScore, 3> runs;
  double median_key = kInf;
};

// Sweeps the learning-rate grid, three seeds per point, and keeps the grid
// point with the smallest seed-median of `key`. Unreached medians stay
// infinite so an arm that never hits the target is visibly untuned.
TunedArm tune_grid(const std::function<RunScore(double, std::uint64_t)>& run,
                   double (*key)(const RunScore&), const char* tag,
                   std::ostringstream* verbose) {
  TunedArm best;
  for (int k = 0; k < kGridPoints; ++k) {
    const double eta = grid_eta(k);
    std::array<RunScore, 3> runs;
    std::array<double, 3> keys;
    for (std::size_t s = 0; s < kSeeds.size(); ++s) {
      runs[s] = run(eta, kSeeds[s]);
      keys[s] = key(runs[s]);
    }
    const double med = median3(keys);
    if (verbose) {
      *verbose << "    " << tag << " eta=" << eta << " median=" << med << " ["
               << keys[0] << " " << keys[1] << " " << keys[2] << "]\n";
    }
    if (med < best.median_key) {
      best.eta = eta;
      best.runs = runs;
      best.median_key = med;
    }
  }
  return best;
}

double median_of(const TunedArm& arm, double (*key)(const RunScore&)) {
  return median3({key(arm.runs[0]), key(arm.runs[1]), key(arm.runs[2])});
}

// ---------------------------------------------------------------------------
// 1. Buffered-async training with K = M, constant equal durations and
//    simultaneous starts must replay the synchronous schedule exactly.

bool crit_reduction(std::string& detail, bool) {
  FederationSpec spec;
  spec.num_clients = 24;
  spec.feature_dim = 6;
  spec.num_classes = 3;
  spec.label_skew_alpha = 0.5;
  spec.class_separation = 2.0;
  spec.mean_examples_per_client = 30;
  spec.size_lognormal_sigma = 0.6;
  spec.seed = 11;
  const Task task = make_task(spec, 0.2);

  SimConfig sim;
  sim.concurrency = 8;
  sim.duration_dist = DurationDist::constant(1.0);
  sim.update_budget = 8 * 50;
  sim.eval_every = 10.0;
  sim.seed = 3;
  LocalConfig local;

  StrategyConfig buffered;
  buffered.kind = StrategyKind::fedbuff;
  buffered.buffer_size = 8;
  buffered.eta_global = 0.5;
  buffered.staleness_alpha = 0.7;  // inert at staleness zero

  StrategyConfig plain = buffered;
  plain.kind = StrategyKind::fedavg;
  plain.staleness_alpha = 0.0;

  std::vector<Vec> trail;
  trail.reserve(50);
  run_async(sim, buffered, local, task.train, task.eval, task.model0,
            [&](std::int64_t, const ModelParams& m) { trail.push_back(m.flat); });

  double worst = 0.0;
  std::size_t step = 0;
  run_sync(sim, plain, local, task.train, task.eval, task.model0,
           [&](std::int64_t, const ModelParams& m) {
             if (step < trail.size()) {
               worst = std::max(
                   worst, (m.flat - trail[step]).cwiseAbs().maxCoeff());
             }
             ++step;
           });

  std::ostringstream os;
  os << "50 steps, max coordinate gap " << worst;
  detail = os.str();
  return trail.size() == 50 && step == 50 && worst <= kCoordTol;
}

// ---------------------------------------------------------------------------
// 2. Analytic gradients against central finite differences for random
//    models and batches of both architectures.

bool crit_gradients(std::string& detail, bool) {
  PrngStream rng(42, 2);
  double worst = 0.0;
  int pairs = 0;
  for (int arch = 0; arch < 2; ++arch) {
    for (int rep = 0; rep < 100; ++rep) {
      ModelLayout layout;
      layout.kind = arch == 0 ? ModelKind::logistic : ModelKind::mlp;
      layout.feature_dim = 2 + static_cast<int>(rng.next_below(9));
      layout.num_classes = 2 + static_cast<int>(rng.next_below(4));
      layout.hidden_dim =
          layout.kind == ModelKind::mlp ? 1 + static_cast<int>(rng.next_below(8))
                                        : 0;
      PrngStream init_rng = rng.fork(200 * arch + rep);
      ModelParams params = init_model(layout, init_rng);
      for (Eigen::Index j = 0; j < params.flat.size(); ++j) {
        params.flat[j] += 0.5 * rng.next_normal();
      }
      const int n = 1 + static_cast<int>(rng.next_below(16));
      std::vector<Example> examples(n);
      for (Example& ex : examples) {
        ex.features = Vec(layout.feature_dim);
        for (Eigen::Index k = 0; k < ex.features.size(); ++k) {
          ex.features[k] = rng.next_normal();
        }
        ex.label = static_cast<int>(rng.next_below(layout.num_classes));
      }
      worst = std::max(worst,
                       finite_diff_check(params, full_batch(examples), 1e-5));
      ++pairs;
    }
  }
  std::ostringstream os;
  os << pairs << " model/batch pairs, worst relative error " << worst;
  detail = os.str();
  return pairs == 200 && worst <= kGradTol;
}

// ---------------------------------------------------------------------------
// 3. Every logged staleness value and accept/reject decision must agree
//    with a naive replay that shares no code with the engine.

bool crit_replay(std::string& detail, bool) {
  FederationSpec spec;
  spec.num_clients = 40;
  spec.feature_dim = 4;
  spec.num_classes = 3;
  spec.label_skew_alpha = 0.5;
  spec.class_separation = 1.5;
  spec.mean_examples_per_client = 15;
  spec.size_lognormal_sigma = 0.7;
  spec.seed = 33;
  const Task task = make_task(spec, 0.1);

  struct Combo {
    int m;
    DurationDist dist;
  };
  std::vector<Combo> combos;
  const DurationDist random_kinds[3] = {DurationDist::half_normal(1.25),
                                        DurationDist::uniform(2.0),
                                        DurationDist::exponential(1.0)};
  for (int m : {2, 4, 16}) {
    for (const DurationDist& dist : random_kinds) combos.push_back({m, dist});
  }
  combos.push_back({4, DurationDist::constant(1.0)});
  combos.push_back({16, DurationDist::constant(1.0)});

  std::int64_t runs = 0;
  std::int64_t tasks_checked = 0;
  std::int64_t mismatches = 0;
  for (std::size_t c = 0; c < combos.size(); ++c) {
    // Two seeds per randomized combo, one per constant combo: 20 runs. The
    // second seed also turns on a tight staleness cutoff so rejected tasks
    // get replayed too.
    const int seeds_here = c < 9 ? 2 : 1;
    for (int s = 0; s < seeds_here; ++s) {
      SimConfig sim;
      sim.concurrency = combos[c].m;
      sim.duration_dist = combos[c].dist;
      sim.update_budget = 600;
      sim.eval_every = 25.0;
      sim.seed = 101 + 10 * static_cast<std::uint64_t>(c) + s;
      sim.tau_max = s == 1 ? 2 : -1;
      StrategyConfig strat;
      strat.kind = StrategyKind::fedbuff;
      strat.buffer_size = std::min(3, combos[c].m);
      strat.eta_global = 0.3;
      strat.staleness_alpha = 0.5;
      LocalConfig local;
      const MetricsLog log =
          run_async(sim, strat, local, task.train, task.eval, task.model0);
      mismatches += static_cast<std::int64_t>(
          oracle::replay_mismatches(log, strat.buffer_size, sim.tau_max));
      tasks_checked += static_cast<std::int64_t>(log.tasks.size());
      ++runs;
    }
  }
  std::ostringstream os;
  os << runs << " runs, " << tasks_checked << " tasks, " << mismatches
     << " mismatches";
  detail = os.str();
  return runs == 20 && tasks_checked > 10000 && mismatches == 0;
}

// ---------------------------------------------------------------------------
// 4. The aggregation state machine under random traffic, plus insertion
//    order invariance of the flushed model.

bool crit_state_machine(std::string& detail, bool) {
  ModelLayout layout;
  layout.kind = ModelKind::logistic;
  layout.feature_dim = 3;
  layout.num_classes = 4;
  ModelParams w0;
  w0.layout = layout;
  w0.flat = Vec::Zero(layout.param_count());

  StrategyConfig cfg;
  cfg.kind = StrategyKind::fedbuff;
  cfg.buffer_size = 8;
  cfg.eta_global = 0.7;
  cfg.staleness_alpha = 0.5;

  PrngStream rng(4, 4);
  auto random_update = [&](std::int64_t max_back, std::int64_t now) {
    ClientUpdate u;
    u.client_id = static_cast<std::int64_t>(rng.next_below(300));
    u.pull_version =
        std::max<std::int64_t>(0, now - static_cast<std::int64_t>(
                                            rng.next_below(max_back + 1)));
    u.num_examples = 1 + static_cast<std::int64_t>(rng.next_below(50));
    u.num_steps_taken = 1 + static_cast<std::int64_t>(rng.next_below(4));
    u.delta = Vec(w0.flat.size());
    for (Eigen::Index j = 0; j < u.delta.size(); ++j) {
      u.delta[j] = rng.next_normal();
    }
    return u;
  };

  ServerState srv(w0);
  const int events = 10000;
  std::int64_t flushes = 0;
  bool ok = true;
  for (int e = 0; e < events; ++e) {
    srv.buffer_add(random_update(5, srv.step()), cfg, Weighting::lr_norm,
                   srv.step());
    if (srv.maybe_flush(cfg)) {
      ++flushes;
      ok = ok && srv.fill_count() == 0;
    }
    ok = ok && srv.fill_count() < cfg.buffer_size;
    ok = ok && srv.step() == flushes;
  }
  ok = ok && flushes == events / cfg.buffer_size;

  // One buffer's worth of updates, five shuffled insertion orders, all
  // flushing to the same model. Duplicate client ids and example-count
  // weighting stress the canonical summation.
  std::vector<ClientUpdate> batch;
  for (int i = 0; i < cfg.buffer_size; ++i) {
    ClientUpdate u = random_update(0, 0);
    u.client_id = i / 2;
    batch.push_back(std::move(u));
  }
  auto flush_once = [&](const std::vector<int>& order) {
    ServerState s(w0);
    for (int idx : order) {
      s.buffer_add(batch[idx], cfg, Weighting::example_weight, 0);
    }
    s.maybe_flush(cfg);
    return s.model().flat;
  };
  std::vector<int> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  const Vec reference = flush_once(order);
  double worst = 0.0;
  for (int p = 0; p < 5; ++p) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[rng.next_below(i + 1)]);
    }
    worst =
        std::max(worst, (flush_once(order) - reference).cwiseAbs().maxCoeff());
  }
  ok = ok && worst <= kCoordTol;

  std::ostringstream os;
  os << events << " events, " << flushes << " flushes, max permutation gap "
     << worst;
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 5. Closed-form staleness-weight and step-size identities hold exactly.

bool crit_identities(std::string& detail, bool) {
  const double eta = 0.37;
  const bool ok =
      staleness_weight(0, 0.0) == 1.0 && staleness_weight(0, 0.5) == 1.0 &&
      staleness_weight(0, 2.0) == 1.0 && staleness_weight(3, 0.5) == 0.5 &&
      normalized_step_lr(eta, 32, 32, true) == eta &&
      normalized_step_lr(eta, 16, 32, true) == eta / 2.0 &&
      normalized_step_lr(eta, 16, 32, false) == eta;
  detail = ok ? "all identities exact" : "an identity is off";
  return ok;
}

// ---------------------------------------------------------------------------
// 6. Residual bound for the normalized step-size rule on one-dimensional
//    least squares, where every quantity in the bound is closed-form:
//    L = 1, the minimizer is the sample mean, and the single-example
//    gradient variance is the population variance of the targets.

bool crit_bound(std::string& detail, bool) {
  PrngStream data_rng(6, 1);
  const int N = 256;
  std::vector<double> a(static_cast<std::size_t>(N));
  for (double& v : a) v = data_rng.next_normal();
  const double abar = std::accumulate(a.begin(), a.end(), 0.0) / N;
  double sigma2 = 0.0;
  for (double v : a) sigma2 += (v - abar) * (v - abar);
  sigma2 /= N;

  const double eta_l = 0.5;  // within the rule's cap of 1/L
  const int nominal = 8;
  const int pattern[3] = {1, 3, 8};  // mixed batch sizes, short ones included
  const int Q = 90;
  const double y_start = 3.0;

  double a_q = 0.0;
  for (int q = 0; q < Q; ++q) {
    a_q += normalized_step_lr(eta_l, pattern[q % 3], nominal, true);
  }
  const double gap = 0.5 * (y_start - abar) * (y_start - abar);
  const double bound = 2.0 * gap / a_q + eta_l * sigma2 / nominal;

  const int runs = 50;
  std::vector<double> lhs(static_cast<std::size_t>(runs));
  for (int r = 0; r < runs; ++r) {
    PrngStream rng(900 + static_cast<std::uint64_t>(r), 6);
    double y = y_start;
    double acc = 0.0;
    for (int q = 0; q < Q; ++q) {
      const int b = pattern[q % 3];
      const double eta_q = normalized_step_lr(eta_l, b, nominal, true);
      const double full_grad = y - abar;
      acc += eta_q * full_grad * full_grad;
      double g = 0.0;
      for (int j = 0; j < b; ++j) {
        g += y - a[rng.next_below(static_cast<std::uint64_t>(N))];
      }
      y -= eta_q * (g / b);
    }
    lhs[static_cast<std::size_t>(r)] = acc / a_q;
  }
  const double mean = std::accumulate(lhs.begin(), lhs.end(), 0.0) / runs;
  double var = 0.0;
  for (double v : lhs) var += (v - mean) * (v - mean);
  var /= runs - 1;
  const double se = std::sqrt(var / runs);

  std::ostringstream os;
  os << "weighted mean grad norm " << mean << " vs bound " << bound
     << " (3 s.e. " << kMcSlack * se << ")";
  detail = os.str();
  return mean > 0.0 && mean <= bound + kMcSlack * se;
}

// ---------------------------------------------------------------------------
// 7. Synchronous scaling: quadrupling cohort size cuts rounds-to-target by
//    less than 4x while total client updates strictly grow. Constant
//    durations keep one eval row per round; the learning rate is tuned per
//    cohort size.

bool crit_scaling(std::string& detail, bool verbose) {
  const Task& task = benchmark_task();
  const DurationDist dist = DurationDist::constant(1.0);
  std::ostringstream vs;

  auto tuned_for = [&](int m, const char* tag) {
    return tune_grid(
        [&, m](double eta, std::uint64_t seed) {
          return run_sync_arm(task, StrategyKind::fedavgm, m, eta, 1.0, dist,
                              seed, m * kRoundCap7, 1.0, kTargetScaling);
        },
        key_steps, tag, verbose ? &vs : nullptr);
  };
  const TunedArm low = tuned_for(100, "M=100");
  const TunedArm high = tuned_for(400, "M=400");
  if (verbose) std::fputs(vs.str().c_str(), stdout);

  if (!std::isfinite(low.median_key) || !std::isfinite(high.median_key)) {
    detail = "target never reached";
    return false;
  }
  const double r100 = low.median_key;
  const double r400 = high.median_key;
  const double u100 = median_of(low, key_updates);
  const double u400 = median_of(high, key_updates);
  const double ratio = r100 / r400;

  std::ostringstream os;
  os << "rounds " << r100 << " -> " << r400 << " (ratio " << ratio
     << "), updates " << u100 << " -> " << u400 << ", eta " << low.eta << "/"
     << high.eta;
  detail = os.str();
  return r400 < r100 && ratio < 4.0 && u400 > u100;
}

// ---------------------------------------------------------------------------
// 8 and 9. Buffered aggregation reaches the target in fewer client updates
// than both the synchronous and the immediate-application baseline, each
// arm tuned on its own learning-rate grid, across duration distributions.

bool speedup_under(const DurationDist& dist, const char* label,
                   std::string& detail, bool verbose) {
  const Task& task = benchmark_task();
  std::ostringstream vs;
  std::ostringstream* vp = verbose ? &vs : nullptr;

  // With 400 clients in flight an eval window of 0.25 time units holds about
  // a hundred arrivals, coarse enough to round two different crossing times
  // to the same update count. 0.05 resolves to roughly twenty arrivals.
  const double eval_every = 0.05;
  // Four local steps per update put the arms in the client-drift regime:
  // immediate application pays for each drifted delta on its own, while the
  // buffer cancels drift across ten clients before the model moves.
  const int local_steps = 4;
  // Shared staleness exponent. 0.75 on purpose: at 0.5 (or 1.0) and a
  // half-decade learning-rate grid, the immediate arm at eta * K^alpha
  // mimics the buffered arm at eta update for update, since its staleness
  // counter runs K times faster and (1 + K tau)^-a / (1 + tau)^-a
  // approaches K^a, which lands exactly on a grid point; 0.75 keeps the
  // mimic ratio half way between grid points.
  const double alpha = 0.75;
  const TunedArm buffered = tune_grid(
      [&](double eta, std::uint64_t seed) {
        return run_async_arm(task, 400, 10, eta, alpha, dist, seed, kBudget8,
                             eval_every, kTargetSpeedup, local_steps);
      },
      key_updates, "fedbuff", vp);
  const TunedArm immediate = tune_grid(
      [&](double eta, std::uint64_t seed) {
        return run_async_arm(task, 400, 1, eta, alpha, dist, seed, kBudget8,
                             eval_every, kTargetSpeedup, local_steps);
      },
      key_updates, "fedasync", vp);
  const TunedArm synchronous = tune_grid(
      [&](double eta, std::uint64_t seed) {
        return run_sync_arm(task, StrategyKind::fedavgm, 400, eta, 1.0, dist,
                            seed, kBudget8, eval_every, kTargetSpeedup,
                            local_steps);
      },
      key_updates, "fedavgm", vp);
  if (verbose) std::fputs(vs.str().c_str(), stdout);

  std::ostringstream os;
  os << label << ": updates fedbuff " << buffered.median_key << " (eta "
     << buffered.eta << "), fedavgm " << synchronous.median_key << " (eta "
     << synchronous.eta << "), fedasync " << immediate.median_key << " (eta "
     << immediate.eta << ")";
  detail = os.str();
  return std::isfinite(buffered.median_key) &&
         buffered.median_key < synchronous.median_key &&
         buffered.median_key < immediate.median_key;
}

bool crit_speedup_half_normal(std::string& detail, bool verbose) {
  return speedup_under(DurationDist::half_normal(1.25), "half-normal", detail,
                       verbose);
}

bool crit_speedup_other(std::string& detail, bool verbose) {
  std::string a;
  std::string b;
  const bool uniform_ok =
      speedup_under(DurationDist::uniform(2.0), "uniform", a, verbose);
  const bool exponential_ok =
      speedup_under(DurationDist::exponential(1.0), "exponential", b, verbose);
  detail = a + "; " + b;
  return uniform_ok && exponential_ok;
}

// ---------------------------------------------------------------------------
// 10. Over-selection: discarding the slowest 30% of each cohort trades
//     strictly more client updates for strictly less wall-clock on every
//     seed, and buffered aggregation with K = M still beats the
//     over-selected synchronous arm on wall-clock. The buffered arm runs
//     with a large staleness exponent, which all but mutes updates older
//     than one step; at K = M that plays the same straggler-taming role
//     as over-selection without discarding any work.
//
//     The factor pair runs at a pinned learning rate one grid notch below
//     the wall-clock optimum. At the stability edge the round count to
//     target swings by several rounds between otherwise identical runs,
//     which drowns the mechanical straggler effect the check is about; in
//     the stable zone the per-seed round counts repeat and the comparison
//     isolates the cohort timing.

bool crit_overselection(std::string& detail, bool verbose) {
  const Task& task = benchmark_task();
  const DurationDist dist = DurationDist::half_normal(1.25);
  std::ostringstream vs;
  std::ostringstream* vp = verbose ? &vs : nullptr;

  const TunedArm buffered = tune_grid(
      [&](double eta, std::uint64_t seed) {
        return run_async_arm(task, 100, 100, eta, 10.0, dist, seed, kBudget10,
                             0.25, kTargetOverselect);
      },
      key_wallclock, "fedbuff", vp);
  if (verbose) std::fputs(vs.str().c_str(), stdout);

  if (!std::isfinite(buffered.median_key)) {
    detail = "target never reached";
    return false;
  }

  bool per_seed = true;
  std::array<double, 3> wall_base;
  std::array<double, 3> wall_over;
  std::array<double, 3> updates_ratio;
  for (std::size_t s = 0; s < kSeeds.size(); ++s) {
    const RunScore base =
        run_sync_arm(task, StrategyKind::fedavgm, 100, kEtaOverPair, 1.0, dist,
                     kSeeds[s], kBudget10, 0.25, kTargetOverselect);
    const RunScore over =
        run_sync_arm(task, StrategyKind::fedavgm, 100, kEtaOverPair, 1.3, dist,
                     kSeeds[s], kBudget10Over, 0.25, kTargetOverselect);
    per_seed = per_seed && over.updates != kUnreached &&
               base.updates != kUnreached && over.wallclock < base.wallclock &&
               over.updates > base.updates;
    wall_base[s] = base.wallclock;
    wall_over[s] = over.wallclock;
    updates_ratio[s] = over.updates == kUnreached || base.updates == kUnreached
                           ? 0.0
                           : static_cast<double>(over.updates) /
                                 static_cast<double>(base.updates);
  }
  const double med_over = median3(wall_over);
  const double med_buffered = median_of(buffered, key_wallclock);

  std::ostringstream os;
  os << "wall-clock fedavgm " << median3(wall_base) << " -> 1.3x " << med_over
     << " (updates x" << median3(updates_ratio) << "), fedbuff "
     << med_buffered;
  detail = os.str();
  return per_seed && med_buffered < med_over;
}

// ---------------------------------------------------------------------------
// 11. Mean-normalized duration samplers match their analytic moments.

bool crit_moments(std::string& detail, bool) {
  struct Case {
    DurationDist dist;
    double want_var;
    const char* name;
  };
  const Case cases[] = {
      {DurationDist::half_normal(1.25), std::numbers::pi / 2.0 - 1.0,
       "half-normal"},
      {DurationDist::uniform(2.0), 1.0 / 3.0, "uniform"},
      {DurationDist::exponential(1.0), 1.0, "exponential"},
  };
  const int n = 1000000;
  bool ok = true;
  std::ostringstream os;
  for (std::size_t k = 0; k < std::size(cases); ++k) {
    PrngStream rng(11, k);
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sample_duration(cases[k].dist, rng);
      sum += d;
      sumsq += d * d;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    ok = ok && std::abs(mean - 1.0) <= kMeanTol &&
         std::abs(var - cases[k].want_var) / cases[k].want_var <= kVarTol;
    if (k > 0) os << ", ";
    os << cases[k].name << " mean " << mean << " var " << var;
  }
  detail = os.str();
  return ok;
}

// ---------------------------------------------------------------------------
// 12. The compare subcommand is bytewise reproducible end to end.

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(FEDSIM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool crit_repro(std::string& detail, bool) {
  const fs::path base = fs::temp_directory_path() / "fedsim_acceptance";
  const fs::path dir_a = base / "repro_a";
  const fs::path dir_b = base / "repro_b";
  std::error_code ec;
  fs::remove_all(dir_a, ec);
  fs::remove_all(dir_b, ec);

  const std::string cfg =
      std::string(FEDSIM_SOURCE_DIR) + "/configs/smoke_compare.conf";
  if (run_cli("compare " + cfg + " --out-dir " + dir_a.string()) != 0 ||
      run_cli("compare " + cfg + " --out-dir " + dir_b.string()) != 0) {
    detail = "compare invocation failed";
    return false;
  }

  auto list_csv = [](const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".csv") out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  const std::vector<fs::path> in_a = list_csv(dir_a);
  const std::vector<fs::path> in_b = list_csv(dir_b);
  if (in_a.size() != 5 || in_b.size() != 5) {
    detail = "expected five strategy logs per run";
    return false;
  }
  int identical = 0;
  for (std::size_t i = 0; i < in_a.size(); ++i) {
    if (in_a[i].filename() == in_b[i].filename() &&
        slurp(in_a[i]) == slurp(in_b[i])) {
      ++identical;
    }
  }
  detail = "5 strategy logs byte-identical across reruns";
  return identical == 5;
}

struct Criterion {
  int id;
  const char* name;
  bool (*fn)(std::string&, bool);
};

const Criterion kCriteria[] = {
    {1, "sync/async reduction identity", crit_reduction},
    {2, "analytic gradients vs finite differences", crit_gradients},
    {3, "staleness replay oracle", crit_replay},
    {4, "aggregation state machine", crit_state_machine},
    {5, "weight and step-size identities", crit_identities},
    {6, "normalized step-size residual bound", crit_bound},
    {7, "synchronous scaling trend", crit_scaling},
    {8, "buffered speedup, half-normal durations", crit_speedup_half_normal},
    {9, "buffered speedup, uniform/exponential", crit_speedup_other},
    {10, "over-selection trade-off", crit_overselection},
    {11, "duration sampler moments", crit_moments},
    {12, "command-line reproducibility", crit_repro},
};

}  // namespace

int main(int argc, char** argv) {
  bool verbose = false;
  std::vector<int> picked;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--verbose" || arg == "-v") {
      verbose = true;
    } else {
      picked.push_back(std::atoi(argv[i]));
    }
  }

  int ran = 0;
  int passed = 0;
  for (const Criterion& c : kCriteria) {
    if (!picked.empty() &&
        std::find(picked.begin(), picked.end(), c.id) == picked.end()) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = false;
    try {
      pass = c.fn(detail, verbose);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::printf("[%2d] %s  %-44s %7.1fs  %s\n", c.id, pass ? "PASS" : "FAIL",
                c.name, secs, detail.c_str());
    std::fflush(stdout);
    ++ran;
    if (pass) ++passed;
  }
  std::printf("acceptance: %d/%d passed\n", passed, ran);
  return passed == ran ? 0 : 1;
}
