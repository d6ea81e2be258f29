#include "fedsim/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fedsim/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace fedsim {

Eigen::Index ModelLayout::param_count() const {
  const auto d = static_cast<Eigen::Index>(feature_dim);
  const auto c = static_cast<Eigen::Index>(num_classes);
  const auto h = static_cast<Eigen::Index>(hidden_dim);
  switch (kind) {
    case ModelKind::logistic:
      return c * d + c;
    case ModelKind::mlp:
      return h * d + h + c * h + c;
  }
  return 0;
}

Batch full_batch(const std::vector<Example>& examples) {
  Batch b;
  b.reserve(examples.size());
  for (const auto& ex : examples) b.push_back(&ex);
  return b;
}

namespace {

void check_layout(const ModelLayout& layout) {
  if (layout.feature_dim < 1 || layout.num_classes < 2) {
    throw ConfigError("model needs feature_dim >= 1 and num_classes >= 2");
  }
  if (layout.kind == ModelKind::mlp && layout.hidden_dim < 1) {
    throw ConfigError("mlp needs hidden_dim >= 1");
  }
}

void check_batch(const ModelParams& params, const Batch& batch) {
  if (batch.empty()) throw StructuralError("empty batch");
  if (params.flat.size() != params.layout.param_count()) {
    throw StructuralError("parameter vector does not match layout");
  }
  for (const Example* ex : batch) {
    if (ex->features.size() != params.layout.feature_dim) {
      throw StructuralError("example feature dim " +
                            std::to_string(ex->features.size()) +
                            " != model feature dim " +
                            std::to_string(params.layout.feature_dim));
    }
    if (ex->label < 0 || ex->label >= params.layout.num_classes) {
      throw StructuralError("label out of range: " + std::to_string(ex->label));
    }
  }
}

Mat gather(const Batch& batch, int feature_dim) {
  Mat x(feature_dim, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    x.col(static_cast<Eigen::Index>(j)) = batch[j]->features;
  }
  return x;
}

// Column-wise softmax probabilities, plus the mean cross-entropy against the
// given labels. Shift-by-max keeps the exponentials in range.
template <typename LabelAt>
double softmax_ce(Mat& z, LabelAt label_at, Mat* probs_out) {
  const Eigen::Index n = z.cols();
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    auto col = z.col(j);
    const double zmax = col.maxCoeff();
    const double lse = zmax + std::log((col.array() - zmax).exp().sum());
    total += lse - col[label_at(j)];
    if (probs_out) probs_out->col(j) = (col.array() - lse).exp();
  }
  return total / static_cast<double>(n);
}

struct LogisticView {
  Eigen::Map<const Mat> w;
  Eigen::Map<const Vec> b;
  explicit LogisticView(const ModelParams& p)
      : w(p.flat.data(), p.layout.num_classes, p.layout.feature_dim),
        b(p.flat.data() + p.layout.num_classes * p.layout.feature_dim,
          p.layout.num_classes) {}
};

struct MlpView {
  Eigen::Map<const Mat> w1;
  Eigen::Map<const Vec> b1;
  Eigen::Map<const Mat> w2;
  Eigen::Map<const Vec> b2;
  explicit MlpView(const ModelParams& p)
      : w1(p.flat.data(), p.layout.hidden_dim, p.layout.feature_dim),
        b1(p.flat.data() + p.layout.hidden_dim * p.layout.feature_dim,
           p.layout.hidden_dim),
        w2(p.flat.data() + p.layout.hidden_dim * p.layout.feature_dim +
               p.layout.hidden_dim,
           p.layout.num_classes, p.layout.hidden_dim),
        b2(p.flat.data() + p.layout.hidden_dim * p.layout.feature_dim +
               p.layout.hidden_dim +
               p.layout.num_classes * p.layout.hidden_dim,
           p.layout.num_classes) {}
};

Mat logits_of(const ModelParams& params, const Mat& x) {
  if (params.layout.kind == ModelKind::logistic) {
    const LogisticView v(params);
    return (v.w * x).colwise() + v.b;
  }
  const MlpView v(params);
  const Mat h = ((v.w1 * x).colwise() + v.b1).array().tanh();
  return (v.w2 * h).colwise() + v.b2;
}

}  // namespace

ModelParams init_model(const ModelLayout& layout, PrngStream& rng) {
  check_layout(layout);
  ModelParams p;
  p.layout = layout;
  p.flat = Vec::Zero(layout.param_count());
  if (layout.kind == ModelKind::mlp) {
    const auto d = static_cast<Eigen::Index>(layout.feature_dim);
    const auto h = static_cast<Eigen::Index>(layout.hidden_dim);
    const auto c = static_cast<Eigen::Index>(layout.num_classes);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
    Eigen::Index i = 0;
    for (; i < h * d + h; ++i) p.flat[i] = s1 * (2.0 * rng.next_unit() - 1.0);
    for (; i < h * d + h + c * h + c; ++i) {
      p.flat[i] = s2 * (2.0 * rng.next_unit() - 1.0);
    }
  }
  return p;
}

double loss(const ModelParams& params, const Batch& batch) {
  check_batch(params, batch);
  const Mat x = gather(batch, params.layout.feature_dim);
  Mat z = logits_of(params, x);
  return softmax_ce(z, [&](Eigen::Index j) { return batch[j]->label; },
                    nullptr);
}

Vec gradient(const ModelParams& params, const Batch& batch) {
  check_batch(params, batch);
  const auto n = static_cast<Eigen::Index>(batch.size());
  const double inv_n = 1.0 / static_cast<double>(n);
  const Mat x = gather(batch, params.layout.feature_dim);

  Vec grad = Vec::Zero(params.flat.size());
  if (params.layout.kind == ModelKind::logistic) {
    const LogisticView v(params);
    Mat z = (v.w * x).colwise() + v.b;
    Mat p(z.rows(), z.cols());
    softmax_ce(z, [&](Eigen::Index j) { return batch[j]->label; }, &p);
    for (Eigen::Index j = 0; j < n; ++j) p(batch[j]->label, j) -= 1.0;
    p *= inv_n;
    const auto c = static_cast<Eigen::Index>(params.layout.num_classes);
    const auto d = static_cast<Eigen::Index>(params.layout.feature_dim);
    Eigen::Map<Mat>(grad.data(), c, d) = p * x.transpose();
    Eigen::Map<Vec>(grad.data() + c * d, c) = p.rowwise().sum();
    return grad;
  }

  const MlpView v(params);
  const Mat h = ((v.w1 * x).colwise() + v.b1).array().tanh();
  Mat z = (v.w2 * h).colwise() + v.b2;
  Mat p(z.rows(), z.cols());
  softmax_ce(z, [&](Eigen::Index j) { return batch[j]->label; }, &p);
  for (Eigen::Index j = 0; j < n; ++j) p(batch[j]->label, j) -= 1.0;
  p *= inv_n;
  // Backprop through the tanh layer.
  const Mat dh = (v.w2.transpose() * p).cwiseProduct(
      (1.0 - h.array().square()).matrix());
  const auto d = static_cast<Eigen::Index>(params.layout.feature_dim);
  const auto hd = static_cast<Eigen::Index>(params.layout.hidden_dim);
  const auto c = static_cast<Eigen::Index>(params.layout.num_classes);
  double* g = grad.data();
  Eigen::Map<Mat>(g, hd, d) = dh * x.transpose();
  Eigen::Map<Vec>(g + hd * d, hd) = dh.rowwise().sum();
  Eigen::Map<Mat>(g + hd * d + hd, c, hd) = p * h.transpose();
  Eigen::Map<Vec>(g + hd * d + hd + c * hd, c) = p.rowwise().sum();
  return grad;
}

double finite_diff_check(const ModelParams& params, const Batch& batch,
                         double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  const Vec analytic = gradient(params, batch);
  const Eigen::Index dim = params.flat.size();

  std::vector<Eigen::Index> coords;
  if (dim <= 64) {
    coords.resize(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) {
      coords[static_cast<std::size_t>(i)] = i;
    }
  } else {
    // Fixed stream so the probed subset is reproducible run to run.
    PrngStream rng(0x66d1ffULL, static_cast<std::uint64_t>(dim));
    std::vector<bool> seen(static_cast<std::size_t>(dim), false);
    while (coords.size() < 64) {
      const auto i = static_cast<Eigen::Index>(
          rng.next_below(static_cast<std::uint64_t>(dim)));
      if (!seen[static_cast<std::size_t>(i)]) {
        seen[static_cast<std::size_t>(i)] = true;
        coords.push_back(i);
      }
    }
  }

  ModelParams probe = params;
  double worst = 0.0;
  for (const Eigen::Index i : coords) {
    const double saved = probe.flat[i];
    probe.flat[i] = saved + epsilon;
    const double up = loss(probe, batch);
    probe.flat[i] = saved - epsilon;
    const double down = loss(probe, batch);
    probe.flat[i] = saved;
    const double fd = (up - down) / (2.0 * epsilon);
    const double a = analytic[i];
    const double err =
        std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
    worst = std::max(worst, err);
  }
  return worst;
}

EvalSet EvalSet::from_examples(const std::vector<Example>& examples) {
  EvalSet s;
  if (examples.empty()) return s;
  s.features = Mat(examples[0].features.size(),
                   static_cast<Eigen::Index>(examples.size()));
  s.labels.reserve(examples.size());
  for (std::size_t j = 0; j < examples.size(); ++j) {
    s.features.col(static_cast<Eigen::Index>(j)) = examples[j].features;
    s.labels.push_back(examples[j].label);
  }
  return s;
}

std::pair<double, double> evaluate(const ModelParams& params,
                                   const EvalSet& eval) {
  if (eval.empty()) throw ConfigError("evaluation set is empty");
  if (eval.features.rows() != params.layout.feature_dim) {
    throw StructuralError("eval feature dim does not match model");
  }
  Mat z = logits_of(params, eval.features);
  const double mean_loss = softmax_ce(
      z, [&](Eigen::Index j) { return eval.labels[static_cast<std::size_t>(j)]; },
      nullptr);
  std::int64_t correct = 0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    // Manual argmax: ties resolve to the lowest class index.
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < z.rows(); ++r) {
      if (z(r, j) > z(best, j)) best = r;
    }
    if (best == eval.labels[static_cast<std::size_t>(j)]) ++correct;
  }
  return {static_cast<double>(correct) / static_cast<double>(z.cols()),
          mean_loss};
}

std::pair<double, double> evaluate(const ModelParams& params,
                                   const std::vector<Example>& examples) {
  return evaluate(params, EvalSet::from_examples(examples));
}

namespace {

constexpr char kMagic[8] = {'F', 'S', 'M', 'O', 'D', 'E', 'L', '1'};

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t head[4] = {
      static_cast<std::uint32_t>(params.layout.kind),
      static_cast<std::uint32_t>(params.layout.feature_dim),
      static_cast<std::uint32_t>(params.layout.num_classes),
      static_cast<std::uint32_t>(params.layout.hidden_dim)};
  out.write(reinterpret_cast<const char*>(head), sizeof head);
  const auto count = static_cast<std::uint64_t>(params.flat.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  out.write(reinterpret_cast<const char*>(params.flat.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  if (!out) throw IoError("short write on checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IngestionError("bad checkpoint magic in " + path);
  }
  std::uint32_t head[4];
  in.read(reinterpret_cast<char*>(head), sizeof head);
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in) throw IngestionError("truncated checkpoint header in " + path);

  ModelParams p;
  p.layout.kind = static_cast<ModelKind>(head[0]);
  p.layout.feature_dim = static_cast<int>(head[1]);
  p.layout.num_classes = static_cast<int>(head[2]);
  p.layout.hidden_dim = static_cast<int>(head[3]);
  if (p.layout.kind != ModelKind::logistic && p.layout.kind != ModelKind::mlp) {
    throw IngestionError("unknown model kind in " + path);
  }
  if (static_cast<Eigen::Index>(count) != p.layout.param_count()) {
    throw IngestionError("checkpoint parameter count does not match layout in " +
                         path);
  }
  p.flat = Vec(static_cast<Eigen::Index>(count));
  in.read(reinterpret_cast<char*>(p.flat.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw IngestionError("truncated checkpoint payload in " + path);
  return p;
}

}  // namespace fedsim
