#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/client.hpp"
#include "fedsim/model.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

enum class StrategyKind { fedbuff, fedasync, fedavg, fedavgm, fedprox };
enum class AggregateMode { sum, mean };

inline bool is_async(StrategyKind k) {
  return k == StrategyKind::fedbuff || k == StrategyKind::fedasync;
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::fedbuff;
  int buffer_size = 10;  // K; 1 for fedasync, cohort size for sync kinds
  double eta_global = 1.0;
  double momentum = 0.0;        // beta, fedavgm only
  double staleness_alpha = 0.0;  // async kinds only
  AggregateMode aggregate_mode = AggregateMode::sum;
};

// Polynomial staleness discount (1 + tau)^(-alpha). tau must be >= 0.
double staleness_weight(std::int64_t tau, double alpha);

// Aggregation state machine. The buffer is opaque by construction: pending
// weighted deltas are private and only ever read as their sum inside a
// flush, mirroring a secure-aggregation deployment where individual deltas
// are never visible server-side.
class ServerState {
 public:
  explicit ServerState(ModelParams model);

  const ModelParams& model() const { return model_; }
  std::int64_t step() const { return step_; }
  int fill_count() const { return static_cast<int>(pending_.size()); }
  std::int64_t total_client_updates() const { return total_updates_; }

  // Stage one staleness-discounted, weighted delta into the buffer.
  // `now_step` is the server step at application time; staleness is
  // now_step - pull_version and a pull from the future is a protocol error.
  void buffer_add(const ClientUpdate& update, const StrategyConfig& cfg,
                  Weighting weighting, std::int64_t now_step);

  // Flush if the buffer holds K updates: one server step along the summed
  // (or averaged) delta, through the momentum accumulator when beta > 0.
  // Summation order is canonical (sorted by client id, then payload), so the
  // flushed model is invariant to insertion order.
  bool maybe_flush(const StrategyConfig& cfg);

  // Immediate-application baseline: buffer_add plus a guaranteed flush.
  // Requires buffer_size == 1.
  void fedasync_apply(const ClientUpdate& update, const StrategyConfig& cfg,
                      Weighting weighting, std::int64_t now_step);

  // One synchronous round: every update must carry the current step as its
  // pull_version (staleness-free by construction).
  void apply_sync_round(const std::vector<ClientUpdate>& updates,
                        const StrategyConfig& cfg, Weighting weighting);

 private:
  struct Pending {
    std::int64_t client_id;
    Vec delta;  // already staleness- and scheme-weighted
  };

  void apply_step(const Vec& direction, const StrategyConfig& cfg);
  static Vec canonical_sum(std::vector<Pending>& entries);

  ModelParams model_;
  Vec momentum_;
  std::vector<Pending> pending_;
  std::int64_t step_ = 0;
  std::int64_t total_updates_ = 0;
};

}  // namespace fedsim
