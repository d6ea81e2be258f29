#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/rng.hpp"
#include "fedsim/vec.hpp"

namespace fedsim {

struct Example {
  Vec features;
  int label = 0;
};

struct ClientDataset {
  std::int64_t client_id = 0;
  std::vector<Example> examples;
  double weight = 1.0;  // importance weight p_i, currently always 1
};

// Synthetic federation recipe: m clients, Dirichlet(label_skew_alpha) label
// mixtures, log-normal example counts (mu chosen so the mean equals
// mean_examples_per_client), features from class-conditional Gaussians whose
// means sit at class_separation * e_c. Everything is a function of `seed`.
struct FederationSpec {
  std::int64_t num_clients = 100;
  int feature_dim = 10;
  int num_classes = 2;
  double label_skew_alpha = 0.5;
  double size_lognormal_sigma = 1.0;
  std::int64_t mean_examples_per_client = 50;
  double class_separation = 2.0;
  std::uint64_t seed = 0;
};

std::vector<ClientDataset> generate_federation(const FederationSpec& spec);

// CSV ingestion. Header row required; feature columns must parse as reals,
// the label column as a non-negative integer. One dataset per distinct
// client-column value (ids assigned by first appearance), row order kept.
std::vector<ClientDataset> load_csv_federation(
    const std::string& path, const std::vector<std::string>& feature_columns,
    const std::string& label_column, const std::string& client_column);

// Per-client split: floor(eval_fraction * n) examples are held out into the
// pooled eval set; a 1-example client contributes nothing to eval.
std::pair<std::vector<ClientDataset>, std::vector<Example>> train_eval_split(
    const std::vector<ClientDataset>& federation, double eval_fraction,
    std::uint64_t seed);

// Gamma(alpha, 1) variate (Marsaglia-Tsang squeeze); building block for the
// Dirichlet label mixtures, exposed for direct distribution tests.
double sample_gamma(double alpha, PrngStream& rng);

std::int64_t total_examples(const std::vector<ClientDataset>& federation);

}  // namespace fedsim
