#include "fedsim/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/errors.hpp"

namespace fedsim {

namespace {

TargetResult find_target(const MetricsLog& log, double target) {
  // Accuracy of a linear model is invariant to parameter scale, so a row
  // whose loss already blew past the divergence ceiling can still show a
  // high accuracy. Such rows never count as reaching the target.
  const double loss_cap =
      log.rows.empty() ? 0.0 : 1e3 * log.rows.front().loss;
  for (const EvalRow& row : log.rows) {
    const bool healthy = std::isfinite(row.loss) && row.loss <= loss_cap;
    if (healthy && row.accuracy >= target) {
      TargetResult r;
      r.status = TargetResult::Status::reached;
      r.updates = row.client_updates;
      if (row.server_step == 0) {
        r.sim_time = 0.0;
      } else {
        // The model being evaluated was created by flush #server_step.
        const auto idx = static_cast<std::size_t>(row.server_step - 1);
        if (idx >= log.flushes.size()) {
          throw StructuralError("log has eval rows past its flush records");
        }
        r.sim_time = log.flushes[idx].time;
      }
      return r;
    }
  }
  TargetResult r;
  r.status = log.outcome == RunOutcome::diverged
                 ? TargetResult::Status::diverged
                 : TargetResult::Status::not_reached;
  return r;
}

}  // namespace

TargetResult updates_to_target(const MetricsLog& log, double target_accuracy) {
  return find_target(log, target_accuracy);
}

TargetResult wallclock_to_target(const MetricsLog& log, double target_accuracy) {
  return find_target(log, target_accuracy);
}

std::string render_target(const TargetResult& r, std::int64_t budget) {
  switch (r.status) {
    case TargetResult::Status::reached:
      return std::to_string(r.updates);
    case TargetResult::Status::not_reached:
      return ">" + std::to_string(budget);
    case TargetResult::Status::diverged:
      return "diverged";
  }
  return "?";
}

namespace {

void atomic_write(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out << body;
    if (!out) throw IoError("short write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp + " -> " + path + ": " +
                        ec.message());
}

void append_real(std::string& s, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  s += buf;
}

}  // namespace

void emit_csv(const MetricsLog& log, const std::string& path) {
  std::string body =
      "sim_time,server_step,client_updates,accuracy,loss,mean_staleness,"
      "rejected\n";
  for (const EvalRow& row : log.rows) {
    append_real(body, row.sim_time);
    body += ',';
    body += std::to_string(row.server_step);
    body += ',';
    body += std::to_string(row.client_updates);
    body += ',';
    append_real(body, row.accuracy);
    body += ',';
    append_real(body, row.loss);
    body += ',';
    append_real(body, row.mean_staleness);
    body += ',';
    body += std::to_string(row.rejected);
    body += '\n';
  }
  atomic_write(path, body);

  std::string meta;
  for (const auto& [k, v] : log.metadata) {
    meta += k;
    meta += '=';
    meta += v;
    meta += '\n';
  }
  atomic_write(
      std::filesystem::path(path).replace_extension(".meta").string(), meta);
}

MetricsLog load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw IngestionError("empty metrics file: " + path);
  }
  if (line !=
      "sim_time,server_step,client_updates,accuracy,loss,mean_staleness,"
      "rejected") {
    throw IngestionError("unexpected metrics header in " + path);
  }
  MetricsLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7) {
      throw IngestionError(path + " line " + std::to_string(line_no) +
                           ": expected 7 fields");
    }
    EvalRow row;
    row.sim_time = std::strtod(fields[0].c_str(), nullptr);
    row.server_step = std::strtoll(fields[1].c_str(), nullptr, 10);
    row.client_updates = std::strtoll(fields[2].c_str(), nullptr, 10);
    row.accuracy = std::strtod(fields[3].c_str(), nullptr);
    row.loss = std::strtod(fields[4].c_str(), nullptr);
    row.mean_staleness = std::strtod(fields[5].c_str(), nullptr);
    row.rejected = std::strtoll(fields[6].c_str(), nullptr, 10);
    log.rows.push_back(row);
  }
  return log;
}

}  // namespace fedsim
