#pragma once

#include <string>

#include "fedsim/rng.hpp"

namespace fedsim {

enum class DurationKind { constant, half_normal, uniform, exponential };

// Client round-trip duration model. `shape` is the one free parameter and
// its meaning depends on the kind:
//   constant     -> the duration itself
//   half_normal  -> sigma of the underlying normal (|N(0, sigma^2)|)
//   uniform      -> width w of Uniform(0, w)
//   exponential  -> rate lambda
// With normalize_mean set, samples are divided by the analytic mean so the
// distribution has mean exactly 1.0 regardless of shape; that makes timing
// comparisons across distributions apples-to-apples.
struct DurationDist {
  DurationKind kind = DurationKind::constant;
  double shape = 1.0;
  bool normalize_mean = true;

  static DurationDist constant(double value = 1.0);
  static DurationDist half_normal(double sigma = 1.25);
  static DurationDist uniform(double width = 2.0);
  static DurationDist exponential(double rate = 1.0);
};

// Analytic mean of the un-normalized distribution. Raises ConfigError for a
// non-positive shape.
double duration_mean(const DurationDist& dist);

// One strictly positive draw. Deterministic in the stream state; the
// constant kind consumes no draws.
double sample_duration(const DurationDist& dist, PrngStream& rng);

DurationKind duration_kind_from_string(const std::string& s);
std::string to_string(DurationKind kind);

}  // namespace fedsim
