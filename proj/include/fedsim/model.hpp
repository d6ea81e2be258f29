#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/data.hpp"
#include "fedsim/rng.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

enum class ModelKind { logistic, mlp };

// Architecture descriptor. Parameters live in one flat vector; the blocks
// are mapped as column-major matrices in this order:
//   logistic: W (C x d), b (C)
//   mlp:      W1 (H x d), b1 (H), W2 (C x H), b2 (C)
struct ModelLayout {
  ModelKind kind = ModelKind::logistic;
  int feature_dim = 0;
  int num_classes = 0;
  int hidden_dim = 0;  // mlp only

  Eigen::Index param_count() const;
  bool operator==(const ModelLayout&) const = default;
};

struct ModelParams {
  ModelLayout layout;
  Vec flat;
};

// A minibatch is a gathered view: pointers into someone else's examples.
using Batch = std::vector<const Example*>;

Batch full_batch(const std::vector<Example>& examples);

// Zeros for logistic regression; uniform(-1,1)/sqrt(fan_in) per layer for
// the MLP, drawn from `rng` (callers fork a dedicated stream for this).
ModelParams init_model(const ModelLayout& layout, PrngStream& rng);

// Mean cross-entropy over the batch.
double loss(const ModelParams& params, const Batch& batch);

// Gradient of mean cross-entropy, same dimension as params.flat.
Vec gradient(const ModelParams& params, const Batch& batch);

// Worst relative error between the analytic gradient and central finite
// differences. Checks every coordinate up to 64 params, a fixed pseudorandom
// 64-coordinate subset above that. Error is scaled as
// |a - fd| / max(1, |a|, |fd|) so zero-gradient coordinates compare absolutely.
double finite_diff_check(const ModelParams& params, const Batch& batch,
                         double epsilon);

// Pre-gathered evaluation set: features as columns, one label per column.
struct EvalSet {
  Mat features;
  std::vector<int> labels;

  static EvalSet from_examples(const std::vector<Example>& examples);
  bool empty() const { return labels.empty(); }
};

// Top-1 accuracy (argmax ties go to the lowest class index) and mean loss.
std::pair<double, double> evaluate(const ModelParams& params,
                                   const EvalSet& eval);
std::pair<double, double> evaluate(const ModelParams& params,
                                   const std::vector<Example>& examples);

// Checkpoint I/O: little-endian 64-bit reals behind a short layout header.
// Round-trips are bit-exact.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace fedsim
