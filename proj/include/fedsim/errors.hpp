#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Error taxonomy. Configuration problems are user-fixable and map to CLI
// exit code 1; everything else raised at run time maps to exit code 2.

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unreadable external data (CSV ingestion, checkpoints).
struct IngestionError : std::runtime_error {
  explicit IngestionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or layout mismatch between two objects that must agree.
struct StructuralError : std::runtime_error {
  explicit StructuralError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite values produced where finite math was required.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Ordering/state violations between cooperating components (e.g. an update
// applied before it was pulled, or a mixed-version synchronous cohort).
struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failures while emitting artifacts.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace fedsim
