#include "fedsim/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

// Stream labels for the per-purpose forks under one client's stream.
enum : std::uint64_t { kMixture = 0, kSize = 1, kLabels = 2, kFeatures = 3 };

std::vector<double> sample_dirichlet(double alpha, int k, PrngStream& rng) {
  std::vector<double> p(k);
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    p[i] = sample_gamma(alpha, rng);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

int sample_categorical(const std::vector<double>& p, PrngStream& rng) {
  const double u = rng.next_unit();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;  // guard against rounding
}

}  // namespace

double sample_gamma(double alpha, PrngStream& rng) {
  if (!(alpha > 0.0)) {
    throw ConfigError("gamma shape must be positive");
  }
  if (alpha < 1.0) {
    // Boost trick: Gamma(a) = Gamma(a+1) * U^(1/a).
    const double u = rng.next_unit_pos();
    return sample_gamma(alpha + 1.0, rng) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.next_normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.next_unit_pos();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<ClientDataset> generate_federation(const FederationSpec& spec) {
  if (spec.num_clients < 1) throw ConfigError("num_clients must be >= 1");
  if (spec.feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  if (spec.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (spec.num_classes > spec.feature_dim) {
    throw ConfigError(
        "class means sit at one-hot corners, so feature_dim must be >= "
        "num_classes");
  }
  if (!(spec.label_skew_alpha > 0.0)) {
    throw ConfigError("label_skew_alpha must be positive");
  }
  if (spec.size_lognormal_sigma < 0.0) {
    throw ConfigError("size_lognormal_sigma must be non-negative");
  }
  if (spec.mean_examples_per_client < 1) {
    throw ConfigError("mean_examples_per_client must be >= 1");
  }

  // Log-normal with mean exactly mean_examples_per_client:
  // E[exp(mu + sigma Z)] = exp(mu + sigma^2/2).
  const double sigma = spec.size_lognormal_sigma;
  const double mu =
      std::log(static_cast<double>(spec.mean_examples_per_client)) -
      0.5 * sigma * sigma;

  PrngStream root(spec.seed);
  std::vector<ClientDataset> out;
  out.reserve(static_cast<std::size_t>(spec.num_clients));
  for (std::int64_t ci = 0; ci < spec.num_clients; ++ci) {
    PrngStream cstream = root.fork(static_cast<std::uint64_t>(ci));
    PrngStream mix_rng = cstream.fork(kMixture);
    PrngStream size_rng = cstream.fork(kSize);
    PrngStream label_rng = cstream.fork(kLabels);
    PrngStream feat_rng = cstream.fork(kFeatures);

    const std::vector<double> mixture =
        sample_dirichlet(spec.label_skew_alpha, spec.num_classes, mix_rng);

    std::int64_t n = spec.mean_examples_per_client;
    if (sigma > 0.0) {
      n = std::llround(std::exp(mu + sigma * size_rng.next_normal()));
      n = std::max<std::int64_t>(1, n);
    }

    ClientDataset ds;
    ds.client_id = ci;
    ds.examples.reserve(static_cast<std::size_t>(n));
    for (std::int64_t e = 0; e < n; ++e) {
      Example ex;
      ex.label = sample_categorical(mixture, label_rng);
      ex.features = Vec(spec.feature_dim);
      for (int d = 0; d < spec.feature_dim; ++d) {
        ex.features[d] = feat_rng.next_normal();
      }
      ex.features[ex.label] += spec.class_separation;
      ds.examples.push_back(std::move(ex));
    }
    out.push_back(std::move(ds));
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t line_no,
                  const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IngestionError("line " + std::to_string(line_no) +
                         ": non-numeric " + what + " value '" + s + "'");
  }
}

}  // namespace

std::vector<ClientDataset> load_csv_federation(
    const std::string& path, const std::vector<std::string>& feature_columns,
    const std::string& label_column, const std::string& client_column) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open data file: " + path);
  if (feature_columns.empty()) {
    throw IngestionError("no feature columns given for " + path);
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw IngestionError(path + ": empty file (header row required)");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);

  auto column_index = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw IngestionError(path + " line 1: unknown column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> feat_idx;
  feat_idx.reserve(feature_columns.size());
  for (const auto& c : feature_columns) feat_idx.push_back(column_index(c));
  const std::size_t label_idx = column_index(label_column);
  const std::size_t client_idx = column_index(client_column);

  std::vector<ClientDataset> datasets;
  std::unordered_map<std::string, std::size_t> client_slot;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw IngestionError("line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }

    Example ex;
    ex.features = Vec(static_cast<Eigen::Index>(feat_idx.size()));
    for (std::size_t f = 0; f < feat_idx.size(); ++f) {
      ex.features[static_cast<Eigen::Index>(f)] =
          parse_real(fields[feat_idx[f]], line_no, "feature");
    }
    const double label_real = parse_real(fields[label_idx], line_no, "label");
    const auto label = static_cast<std::int64_t>(std::llround(label_real));
    if (static_cast<double>(label) != label_real || label < 0) {
      throw IngestionError("line " + std::to_string(line_no) +
                           ": label must be a non-negative integer, got '" +
                           fields[label_idx] + "'");
    }
    ex.label = static_cast<int>(label);

    const std::string& key = fields[client_idx];
    auto [it, inserted] = client_slot.try_emplace(key, datasets.size());
    if (inserted) {
      ClientDataset ds;
      ds.client_id = static_cast<std::int64_t>(datasets.size());
      datasets.push_back(std::move(ds));
    }
    datasets[it->second].examples.push_back(std::move(ex));
  }
  return datasets;
}

std::pair<std::vector<ClientDataset>, std::vector<Example>> train_eval_split(
    const std::vector<ClientDataset>& federation, double eval_fraction,
    std::uint64_t seed) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("eval_fraction must lie strictly between 0 and 1");
  }
  std::vector<ClientDataset> train;
  std::vector<Example> eval_pool;
  train.reserve(federation.size());
  PrngStream root(seed);
  for (const ClientDataset& ds : federation) {
    const auto n = static_cast<std::int64_t>(ds.examples.size());
    auto n_eval = static_cast<std::int64_t>(
        std::floor(static_cast<double>(n) * eval_fraction));
    n_eval = std::min(n_eval, n - 1);  // never empty a client

    PrngStream rng = root.fork(static_cast<std::uint64_t>(ds.client_id));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(i + 1)));
      std::swap(idx[static_cast<std::size_t>(i)],
                idx[static_cast<std::size_t>(j)]);
    }

    for (std::int64_t i = 0; i < n_eval; ++i) {
      eval_pool.push_back(
          ds.examples[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])]);
    }
    // Kept examples stay in their original order.
    std::vector<std::int64_t> kept(idx.begin() + n_eval, idx.end());
    std::sort(kept.begin(), kept.end());
    ClientDataset td;
    td.client_id = ds.client_id;
    td.weight = ds.weight;
    td.examples.reserve(kept.size());
    for (std::int64_t k : kept) {
      td.examples.push_back(ds.examples[static_cast<std::size_t>(k)]);
    }
    train.push_back(std::move(td));
  }
  return {std::move(train), std::move(eval_pool)};
}

std::int64_t total_examples(const std::vector<ClientDataset>& federation) {
  std::int64_t n = 0;
  for (const auto& ds : federation) {
    n += static_cast<std::int64_t>(ds.examples.size());
  }
  return n;
}

}  // namespace fedsim
