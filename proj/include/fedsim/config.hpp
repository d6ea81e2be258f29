#pragma once

#include <map>
#include <string>
#include <vector>

#include "fedsim/client.hpp"
#include "fedsim/data.hpp"
#include "fedsim/model.hpp"
#include "fedsim/server.hpp"
#include "fedsim/sim.hpp"

namespace fedsim {

enum class DataSource { synthetic, csv };

// Fully parsed run description. The config file format is flat
// `section.key=value` lines; '#' starts a comment. Unknown keys are
// configuration errors, and cross-field rules (momentum only under fedavgm,
// proximal term only under fedprox, staleness discounting only for the
// asynchronous kinds, over-selection only for the synchronous ones, buffer
// size pinned to 1 for fedasync and to the cohort size for sync kinds) are
// enforced by validate().
struct RunConfig {
  DataSource source = DataSource::synthetic;
  FederationSpec federation;
  std::string csv_path;
  std::vector<std::string> csv_feature_columns;
  std::string csv_label_column = "label";
  std::string csv_client_column = "client";
  double eval_fraction = 0.1;

  ModelKind model_kind = ModelKind::logistic;
  int hidden_dim = 32;

  LocalConfig local;
  StrategyConfig strategy;
  SimConfig sim;

  double target_accuracy = 0.8;
  std::string output = "run.csv";
  double compare_momentum = 0.9;  // fedavgm's beta inside `compare`
  double compare_prox_mu = 0.01;  // fedprox's mu inside `compare`

  // sweep.<key> entries: key -> list of candidate values.
  std::map<std::string, std::vector<std::string>> sweep;

  ModelLayout model_layout() const;
  void validate();
};

RunConfig parse_config_file(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Apply one key=value (same schema as the file) onto an existing config.
void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value);

// Canonical key=value rendering of every effective field; this is what the
// .meta sidecar and run metadata carry, and parsing it back reproduces the
// run.
std::map<std::string, std::string> effective_config(const RunConfig& cfg);

std::string to_string(StrategyKind kind);
StrategyKind strategy_kind_from_string(const std::string& s);

}  // namespace fedsim
