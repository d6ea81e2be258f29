#include "fedsim/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string real_str(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += v[i];
  }
  return out;
}

}  // namespace

std::string to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::fedbuff: return "fedbuff";
    case StrategyKind::fedasync: return "fedasync";
    case StrategyKind::fedavg: return "fedavg";
    case StrategyKind::fedavgm: return "fedavgm";
    case StrategyKind::fedprox: return "fedprox";
  }
  return "?";
}

StrategyKind strategy_kind_from_string(const std::string& s) {
  if (s == "fedbuff") return StrategyKind::fedbuff;
  if (s == "fedasync") return StrategyKind::fedasync;
  if (s == "fedavg") return StrategyKind::fedavg;
  if (s == "fedavgm") return StrategyKind::fedavgm;
  if (s == "fedprox") return StrategyKind::fedprox;
  throw ConfigError("unknown strategy kind: " + s);
}

void apply_config_entry(RunConfig& cfg, const std::string& key,
                        const std::string& value) {
  if (key.rfind("sweep.", 0) == 0) {
    const std::string inner = key.substr(6);
    if (inner.empty() || inner.rfind("sweep.", 0) == 0) {
      throw ConfigError("bad sweep key: " + key);
    }
    // Validate the swept key and every candidate against a throwaway copy.
    const auto values = split_list(value);
    if (values.empty()) throw ConfigError(key + ": empty value list");
    RunConfig probe = cfg;
    probe.sweep.clear();
    for (const std::string& v : values) apply_config_entry(probe, inner, v);
    cfg.sweep[inner] = values;
    return;
  }

  if (key == "data.source") {
    if (value == "synthetic") cfg.source = DataSource::synthetic;
    else if (value == "csv") cfg.source = DataSource::csv;
    else throw ConfigError("data.source must be synthetic or csv");
  } else if (key == "data.num_clients") {
    cfg.federation.num_clients = parse_int(key, value);
  } else if (key == "data.feature_dim") {
    cfg.federation.feature_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "data.num_classes") {
    cfg.federation.num_classes = static_cast<int>(parse_int(key, value));
  } else if (key == "data.label_skew_alpha") {
    cfg.federation.label_skew_alpha = parse_real(key, value);
  } else if (key == "data.size_sigma") {
    cfg.federation.size_lognormal_sigma = parse_real(key, value);
  } else if (key == "data.mean_examples") {
    cfg.federation.mean_examples_per_client = parse_int(key, value);
  } else if (key == "data.class_separation") {
    cfg.federation.class_separation = parse_real(key, value);
  } else if (key == "data.seed") {
    cfg.federation.seed = parse_seed(key, value);
  } else if (key == "data.eval_fraction") {
    cfg.eval_fraction = parse_real(key, value);
  } else if (key == "data.csv_path") {
    cfg.csv_path = value;
  } else if (key == "data.csv_features") {
    cfg.csv_feature_columns = split_list(value);
  } else if (key == "data.csv_label") {
    cfg.csv_label_column = value;
  } else if (key == "data.csv_client") {
    cfg.csv_client_column = value;
  } else if (key == "model.kind") {
    if (value == "logistic") cfg.model_kind = ModelKind::logistic;
    else if (value == "mlp") cfg.model_kind = ModelKind::mlp;
    else throw ConfigError("model.kind must be logistic or mlp");
  } else if (key == "model.hidden_dim") {
    cfg.hidden_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "local.eta") {
    cfg.local.eta_local = parse_real(key, value);
  } else if (key == "local.batch_size") {
    cfg.local.batch_size = static_cast<int>(parse_int(key, value));
  } else if (key == "local.mode") {
    if (value == "one_epoch") cfg.local.mode = LocalMode::one_epoch;
    else if (value == "fixed_steps") cfg.local.mode = LocalMode::fixed_steps;
    else throw ConfigError("local.mode must be one_epoch or fixed_steps");
  } else if (key == "local.steps") {
    cfg.local.steps = static_cast<int>(parse_int(key, value));
  } else if (key == "local.lr_norm") {
    cfg.local.lr_norm_enabled = parse_bool(key, value);
  } else if (key == "local.weighting") {
    if (value == "lr_norm") cfg.local.weighting = Weighting::lr_norm;
    else if (value == "example_weight")
      cfg.local.weighting = Weighting::example_weight;
    else if (value == "uniform") cfg.local.weighting = Weighting::uniform;
    else throw ConfigError("local.weighting must be lr_norm, example_weight or uniform");
  } else if (key == "local.prox_mu") {
    cfg.local.prox_mu = parse_real(key, value);
  } else if (key == "strategy.kind") {
    cfg.strategy.kind = strategy_kind_from_string(value);
  } else if (key == "strategy.buffer_size") {
    cfg.strategy.buffer_size = static_cast<int>(parse_int(key, value));
  } else if (key == "strategy.eta_global") {
    cfg.strategy.eta_global = parse_real(key, value);
  } else if (key == "strategy.momentum") {
    cfg.strategy.momentum = parse_real(key, value);
  } else if (key == "strategy.staleness_alpha") {
    cfg.strategy.staleness_alpha = parse_real(key, value);
  } else if (key == "strategy.aggregate") {
    if (value == "sum") cfg.strategy.aggregate_mode = AggregateMode::sum;
    else if (value == "mean") cfg.strategy.aggregate_mode = AggregateMode::mean;
    else throw ConfigError("strategy.aggregate must be sum or mean");
  } else if (key == "sim.concurrency") {
    cfg.sim.concurrency = static_cast<int>(parse_int(key, value));
  } else if (key == "sim.duration") {
    cfg.sim.duration_dist.kind = duration_kind_from_string(value);
  } else if (key == "sim.duration_shape") {
    cfg.sim.duration_dist.shape = parse_real(key, value);
  } else if (key == "sim.normalize_mean") {
    cfg.sim.duration_dist.normalize_mean = parse_bool(key, value);
  } else if (key == "sim.budget_updates") {
    cfg.sim.update_budget = parse_int(key, value);
  } else if (key == "sim.tau_max") {
    cfg.sim.tau_max = value == "unlimited" ? -1 : parse_int(key, value);
  } else if (key == "sim.overselection") {
    cfg.sim.overselection_factor = parse_real(key, value);
  } else if (key == "sim.eval_every") {
    cfg.sim.eval_every = parse_real(key, value);
  } else if (key == "sim.seed") {
    cfg.sim.seed = parse_seed(key, value);
  } else if (key == "sim.stagger_starts") {
    cfg.sim.stagger_initial_starts = parse_bool(key, value);
  } else if (key == "sim.duration_scales_with_data") {
    cfg.sim.duration_scales_with_data = parse_bool(key, value);
  } else if (key == "run.target_accuracy") {
    cfg.target_accuracy = parse_real(key, value);
  } else if (key == "run.output") {
    cfg.output = value;
  } else if (key == "compare.momentum") {
    cfg.compare_momentum = parse_real(key, value);
  } else if (key == "compare.prox_mu") {
    cfg.compare_prox_mu = parse_real(key, value);
  } else {
    throw ConfigError("unknown config key: " + key);
  }
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": expected key=value, got '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    try {
      apply_config_entry(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + " line " + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

ModelLayout RunConfig::model_layout() const {
  ModelLayout layout;
  layout.kind = model_kind;
  layout.feature_dim = federation.feature_dim;
  layout.num_classes = federation.num_classes;
  layout.hidden_dim = model_kind == ModelKind::mlp ? hidden_dim : 0;
  return layout;
}

void RunConfig::validate() {
  if (!(target_accuracy > 0.0 && target_accuracy < 1.0)) {
    throw ConfigError("run.target_accuracy must lie in (0, 1)");
  }
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("data.eval_fraction must lie in (0, 1)");
  }
  if (source == DataSource::csv) {
    if (csv_path.empty()) throw ConfigError("data.csv_path is required");
    if (csv_feature_columns.empty()) {
      throw ConfigError("data.csv_features is required for csv source");
    }
  }
  if (model_kind == ModelKind::mlp && hidden_dim < 1) {
    throw ConfigError("model.hidden_dim must be >= 1");
  }
  if (local.eta_local < 0.0) throw ConfigError("local.eta must be >= 0");
  if (local.batch_size < 1) throw ConfigError("local.batch_size must be >= 1");
  if (local.mode == LocalMode::fixed_steps && local.steps < 1) {
    throw ConfigError("local.steps must be >= 1");
  }
  if (!(strategy.eta_global > 0.0)) {
    throw ConfigError("strategy.eta_global must be > 0");
  }
  if (strategy.momentum < 0.0 || strategy.momentum >= 1.0) {
    throw ConfigError("strategy.momentum must lie in [0, 1)");
  }
  if (strategy.momentum > 0.0 && strategy.kind != StrategyKind::fedavgm) {
    throw ConfigError("strategy.momentum is only valid for fedavgm");
  }
  if (strategy.staleness_alpha < 0.0) {
    throw ConfigError("strategy.staleness_alpha must be >= 0");
  }
  if (strategy.staleness_alpha > 0.0 && !is_async(strategy.kind)) {
    throw ConfigError("strategy.staleness_alpha is only valid for fedbuff/fedasync");
  }
  if (local.prox_mu < 0.0) throw ConfigError("local.prox_mu must be >= 0");
  if (local.prox_mu > 0.0 && strategy.kind != StrategyKind::fedprox) {
    throw ConfigError("local.prox_mu is only valid for fedprox");
  }
  if (strategy.buffer_size < 1) {
    throw ConfigError("strategy.buffer_size must be >= 1");
  }
  if (sim.concurrency < 1) throw ConfigError("sim.concurrency must be >= 1");
  if (sim.update_budget < 0) throw ConfigError("sim.budget_updates must be >= 0");
  if (!(sim.eval_every > 0.0)) throw ConfigError("sim.eval_every must be > 0");
  if (sim.overselection_factor < 1.0) {
    throw ConfigError("sim.overselection must be >= 1");
  }
  if (sim.overselection_factor > 1.0 && is_async(strategy.kind)) {
    throw ConfigError("sim.overselection applies only to synchronous strategies");
  }
  if (!(sim.duration_dist.shape > 0.0)) {
    throw ConfigError("sim.duration_shape must be > 0");
  }
  // Buffer size is pinned by kind: 1 for fedasync, the cohort for sync.
  if (strategy.kind == StrategyKind::fedasync) strategy.buffer_size = 1;
  if (!is_async(strategy.kind)) strategy.buffer_size = sim.concurrency;
}

std::map<std::string, std::string> effective_config(const RunConfig& cfg) {
  std::map<std::string, std::string> m;
  m["data.source"] = cfg.source == DataSource::synthetic ? "synthetic" : "csv";
  m["data.num_clients"] = std::to_string(cfg.federation.num_clients);
  m["data.feature_dim"] = std::to_string(cfg.federation.feature_dim);
  m["data.num_classes"] = std::to_string(cfg.federation.num_classes);
  m["data.label_skew_alpha"] = real_str(cfg.federation.label_skew_alpha);
  m["data.size_sigma"] = real_str(cfg.federation.size_lognormal_sigma);
  m["data.mean_examples"] =
      std::to_string(cfg.federation.mean_examples_per_client);
  m["data.class_separation"] = real_str(cfg.federation.class_separation);
  m["data.seed"] = std::to_string(cfg.federation.seed);
  m["data.eval_fraction"] = real_str(cfg.eval_fraction);
  if (cfg.source == DataSource::csv) {
    m["data.csv_path"] = cfg.csv_path;
    m["data.csv_features"] = join(cfg.csv_feature_columns);
    m["data.csv_label"] = cfg.csv_label_column;
    m["data.csv_client"] = cfg.csv_client_column;
  }
  m["model.kind"] = cfg.model_kind == ModelKind::logistic ? "logistic" : "mlp";
  m["model.hidden_dim"] = std::to_string(cfg.hidden_dim);
  m["local.eta"] = real_str(cfg.local.eta_local);
  m["local.batch_size"] = std::to_string(cfg.local.batch_size);
  m["local.mode"] =
      cfg.local.mode == LocalMode::one_epoch ? "one_epoch" : "fixed_steps";
  m["local.steps"] = std::to_string(cfg.local.steps);
  m["local.lr_norm"] = cfg.local.lr_norm_enabled ? "true" : "false";
  switch (cfg.local.weighting) {
    case Weighting::lr_norm: m["local.weighting"] = "lr_norm"; break;
    case Weighting::example_weight:
      m["local.weighting"] = "example_weight";
      break;
    case Weighting::uniform: m["local.weighting"] = "uniform"; break;
  }
  m["local.prox_mu"] = real_str(cfg.local.prox_mu);
  m["strategy.kind"] = to_string(cfg.strategy.kind);
  m["strategy.buffer_size"] = std::to_string(cfg.strategy.buffer_size);
  m["strategy.eta_global"] = real_str(cfg.strategy.eta_global);
  m["strategy.momentum"] = real_str(cfg.strategy.momentum);
  m["strategy.staleness_alpha"] = real_str(cfg.strategy.staleness_alpha);
  m["strategy.aggregate"] =
      cfg.strategy.aggregate_mode == AggregateMode::sum ? "sum" : "mean";
  m["sim.concurrency"] = std::to_string(cfg.sim.concurrency);
  m["sim.duration"] = to_string(cfg.sim.duration_dist.kind);
  m["sim.duration_shape"] = real_str(cfg.sim.duration_dist.shape);
  m["sim.normalize_mean"] =
      cfg.sim.duration_dist.normalize_mean ? "true" : "false";
  m["sim.budget_updates"] = std::to_string(cfg.sim.update_budget);
  m["sim.tau_max"] = cfg.sim.tau_max < 0 ? std::string("unlimited")
                                         : std::to_string(cfg.sim.tau_max);
  m["sim.overselection"] = real_str(cfg.sim.overselection_factor);
  m["sim.eval_every"] = real_str(cfg.sim.eval_every);
  m["sim.seed"] = std::to_string(cfg.sim.seed);
  m["sim.stagger_starts"] = cfg.sim.stagger_initial_starts ? "true" : "false";
  m["sim.duration_scales_with_data"] =
      cfg.sim.duration_scales_with_data ? "true" : "false";
  m["run.target_accuracy"] = real_str(cfg.target_accuracy);
  m["run.output"] = cfg.output;
  m["compare.momentum"] = real_str(cfg.compare_momentum);
  m["compare.prox_mu"] = real_str(cfg.compare_prox_mu);
  for (const auto& [k, v] : cfg.sweep) m["sweep." + k] = join(v);
  return m;
}

}  // namespace fedsim
