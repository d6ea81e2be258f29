#include "fedsim/client.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "fedsim/errors.hpp"

namespace fedsim {

double normalized_step_lr(double eta_local, int actual_batch,
                          int nominal_batch, bool lr_norm_enabled) {
  if (actual_batch < 1 || nominal_batch < 1) {
    throw StructuralError("batch sizes must be positive");
  }
  if (actual_batch > nominal_batch) {
    throw StructuralError("actual batch " + std::to_string(actual_batch) +
                          " exceeds nominal batch " +
                          std::to_string(nominal_batch));
  }
  if (!lr_norm_enabled) return eta_local;
  return eta_local * static_cast<double>(actual_batch) /
         static_cast<double>(nominal_batch);
}

Vec proximal_gradient(const Vec& base_grad, const ModelParams& y,
                      const ModelParams& anchor, double mu) {
  if (y.flat.size() != anchor.flat.size() ||
      base_grad.size() != y.flat.size()) {
    throw StructuralError("proximal gradient dimension mismatch");
  }
  if (mu == 0.0) return base_grad;
  return base_grad + mu * (y.flat - anchor.flat);
}

double update_weight(const ClientUpdate& update, Weighting weighting) {
  switch (weighting) {
    case Weighting::lr_norm:
      return 1.0;  // scaling already happened inside the local steps
    case Weighting::example_weight:
      return static_cast<double>(update.num_examples);
    case Weighting::uniform:
      return 1.0;
  }
  return 1.0;
}

ClientUpdate local_train(const ModelParams& w, const ClientDataset& data,
                         const LocalConfig& cfg, PrngStream& rng) {
  return local_train(w, data, cfg, rng,
                     [](const ModelParams& y, const Batch& batch) {
                       return gradient(y, batch);
                     });
}

ClientUpdate local_train(const ModelParams& w, const ClientDataset& data,
                         const LocalConfig& cfg, PrngStream& rng,
                         const BatchGradFn& grad_fn) {
  if (data.examples.empty()) {
    throw ConfigError("client " + std::to_string(data.client_id) +
                      " has no training examples");
  }
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (cfg.mode == LocalMode::fixed_steps && cfg.steps < 1) {
    throw ConfigError("fixed_steps mode needs steps >= 1");
  }
  if (cfg.eta_local < 0.0) throw ConfigError("eta_local must be >= 0");

  const auto n = static_cast<std::int64_t>(data.examples.size());
  const std::int64_t batch_cap = std::min<std::int64_t>(n, cfg.batch_size);
  // Effective nominal size for the lr scaling: a dataset smaller than B
  // still counts its batches as short ones relative to B.
  const int nominal = cfg.batch_size;

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto reshuffle = [&] {
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(j)]);
    }
  };

  const std::int64_t steps_per_epoch = (n + batch_cap - 1) / batch_cap;
  const std::int64_t total_steps =
      cfg.mode == LocalMode::one_epoch ? steps_per_epoch : cfg.steps;

  ModelParams y = w;
  Batch batch;
  std::int64_t cursor = n;  // forces a shuffle before the first batch
  for (std::int64_t q = 0; q < total_steps; ++q) {
    if (cursor >= n) {
      reshuffle();
      cursor = 0;
    }
    const std::int64_t take = std::min(batch_cap, n - cursor);
    batch.clear();
    for (std::int64_t i = 0; i < take; ++i) {
      batch.push_back(
          &data.examples[static_cast<std::size_t>(order[static_cast<std::size_t>(cursor + i)])]);
    }
    cursor += take;

    Vec g = grad_fn(y, batch);
    if (cfg.prox_mu > 0.0) g = proximal_gradient(g, y, w, cfg.prox_mu);
    const double eta = normalized_step_lr(cfg.eta_local, static_cast<int>(take),
                                          nominal, cfg.lr_norm_enabled);
    y.flat -= eta * g;
    if (!all_finite(y.flat)) {
      throw NumericalError("client " + std::to_string(data.client_id) +
                           ": non-finite parameters after local step " +
                           std::to_string(q + 1));
    }
  }

  ClientUpdate out;
  out.delta = w.flat - y.flat;
  out.client_id = data.client_id;
  out.num_examples = n;
  out.num_steps_taken = total_steps;
  return out;
}

}  // namespace fedsim
