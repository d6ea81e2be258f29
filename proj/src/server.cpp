#include "fedsim/server.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

double staleness_weight(std::int64_t tau, double alpha) {
  return std::pow(1.0 + static_cast<double>(tau), -alpha);
}

ServerState::ServerState(ModelParams model) : model_(std::move(model)) {
  momentum_ = Vec::Zero(model_.flat.size());
}

void ServerState::buffer_add(const ClientUpdate& update,
                             const StrategyConfig& cfg, Weighting weighting,
                             std::int64_t now_step) {
  if (!is_async(cfg.kind)) {
    throw ProtocolError("buffer_add is only valid for buffered strategies");
  }
  if (update.pull_version > now_step) {
    throw ProtocolError("update pulled at step " +
                        std::to_string(update.pull_version) +
                        " applied at earlier step " + std::to_string(now_step));
  }
  if (update.delta.size() != model_.flat.size()) {
    throw StructuralError("update delta dim does not match model");
  }
  const std::int64_t tau = now_step - update.pull_version;
  const double weight =
      staleness_weight(tau, cfg.staleness_alpha) * update_weight(update, weighting);
  pending_.push_back(Pending{update.client_id, weight * update.delta});
  ++total_updates_;
}

Vec ServerState::canonical_sum(std::vector<Pending>& entries) {
  // Client-id order; payload bytes break the (rare) ties when one client
  // lands twice in a buffer, keeping the sum a function of the multiset.
  std::sort(entries.begin(), entries.end(),
            [](const Pending& a, const Pending& b) {
              if (a.client_id != b.client_id) return a.client_id < b.client_id;
              return std::lexicographical_compare(
                  a.delta.data(), a.delta.data() + a.delta.size(),
                  b.delta.data(), b.delta.data() + b.delta.size());
            });
  Vec sum = Vec::Zero(entries.front().delta.size());
  for (const Pending& p : entries) sum += p.delta;
  return sum;
}

void ServerState::apply_step(const Vec& direction, const StrategyConfig& cfg) {
  if (cfg.momentum > 0.0) {
    momentum_ = cfg.momentum * momentum_ + direction;
    model_.flat -= cfg.eta_global * momentum_;
  } else {
    model_.flat -= cfg.eta_global * direction;
  }
}

bool ServerState::maybe_flush(const StrategyConfig& cfg) {
  if (cfg.buffer_size < 1) throw ConfigError("buffer_size must be >= 1");
  if (fill_count() < cfg.buffer_size) return false;
  Vec d = canonical_sum(pending_);
  if (cfg.aggregate_mode == AggregateMode::mean) {
    d /= static_cast<double>(pending_.size());
  }
  apply_step(d, cfg);
  pending_.clear();
  ++step_;
  return true;
}

void ServerState::fedasync_apply(const ClientUpdate& update,
                                 const StrategyConfig& cfg, Weighting weighting,
                                 std::int64_t now_step) {
  if (cfg.kind != StrategyKind::fedasync) {
    throw ProtocolError("fedasync_apply requires the fedasync strategy");
  }
  if (cfg.buffer_size != 1) {
    throw ConfigError("fedasync runs with buffer_size 1");
  }
  buffer_add(update, cfg, weighting, now_step);
  maybe_flush(cfg);
}

void ServerState::apply_sync_round(const std::vector<ClientUpdate>& updates,
                                   const StrategyConfig& cfg,
                                   Weighting weighting) {
  if (is_async(cfg.kind)) {
    throw ProtocolError("apply_sync_round is only valid for sync strategies");
  }
  if (updates.empty()) throw ProtocolError("empty synchronous cohort");
  std::vector<Pending> entries;
  entries.reserve(updates.size());
  for (const ClientUpdate& u : updates) {
    if (u.pull_version != step_) {
      throw ProtocolError(
          "synchronous round requires pull_version == current step; got " +
          std::to_string(u.pull_version) + " at step " + std::to_string(step_));
    }
    if (u.delta.size() != model_.flat.size()) {
      throw StructuralError("update delta dim does not match model");
    }
    entries.push_back(Pending{u.client_id, update_weight(u, weighting) * u.delta});
  }
  Vec d = canonical_sum(entries);
  if (cfg.aggregate_mode == AggregateMode::mean) {
    d /= static_cast<double>(entries.size());
  }
  apply_step(d, cfg);
  ++step_;
}

}  // namespace fedsim
