#pragma once

#include <cstdint>
#include <functional>

#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

enum class LocalMode { fixed_steps, one_epoch };

// How a client's delta is weighted at aggregation time. lr_norm relies on
// the per-step learning-rate scaling and weighs everyone 1; example_weight
// multiplies by the client's example count; uniform is 1.
enum class Weighting { lr_norm, example_weight, uniform };

struct LocalConfig {
  double eta_local = 0.1;
  int batch_size = 32;
  LocalMode mode = LocalMode::one_epoch;
  int steps = 1;  // Q, used by fixed_steps
  bool lr_norm_enabled = true;
  Weighting weighting = Weighting::lr_norm;
  double prox_mu = 0.0;  // proximal pull toward the pulled model
};

struct ClientUpdate {
  Vec delta;  // y_0 - y_Q; the server subtracts eta_g times the aggregate
  std::int64_t client_id = 0;
  std::int64_t pull_version = 0;  // server step when the model was pulled
  std::int64_t num_examples = 0;
  std::int64_t num_steps_taken = 0;
};

// Per-step learning rate under batch-size normalization: eta * n / B for a
// short batch of n < B examples, plain eta when normalization is off.
double normalized_step_lr(double eta_local, int actual_batch, int nominal_batch,
                          bool lr_norm_enabled);

// base_grad + mu * (y - anchor), the proximal correction.
Vec proximal_gradient(const Vec& base_grad, const ModelParams& y,
                      const ModelParams& anchor, double mu);

double update_weight(const ClientUpdate& update, Weighting weighting);

// Gradient evaluator used by the local SGD loop. The default binds
// models::gradient; tests can substitute surrogate objectives.
using BatchGradFn = std::function<Vec(const ModelParams& y, const Batch&)>;

// Local SGD per the buffered-aggregation client protocol: y starts from the
// pulled model, takes one step per batch (shuffle-then-chunk; one pass in
// one_epoch mode, cycling with reshuffles for fixed_steps), and returns the
// displacement delta = y_0 - y_Q. pull_version is left 0 for the caller.
ClientUpdate local_train(const ModelParams& w, const ClientDataset& data,
                         const LocalConfig& cfg, PrngStream& rng);
ClientUpdate local_train(const ModelParams& w, const ClientDataset& data,
                         const LocalConfig& cfg, PrngStream& rng,
                         const BatchGradFn& grad_fn);

}  // namespace fedsim
