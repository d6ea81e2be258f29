#include "fedsim/duration.hpp"

#include <cmath>
#include <numbers>

#include "fedsim/errors.hpp"

namespace fedsim {

DurationDist DurationDist::constant(double value) {
  return DurationDist{DurationKind::constant, value, true};
}
DurationDist DurationDist::half_normal(double sigma) {
  return DurationDist{DurationKind::half_normal, sigma, true};
}
DurationDist DurationDist::uniform(double width) {
  return DurationDist{DurationKind::uniform, width, true};
}
DurationDist DurationDist::exponential(double rate) {
  return DurationDist{DurationKind::exponential, rate, true};
}

double duration_mean(const DurationDist& dist) {
  if (!(dist.shape > 0.0)) {
    throw ConfigError("duration shape must be positive, got " +
                      std::to_string(dist.shape));
  }
  switch (dist.kind) {
    case DurationKind::constant:
      return dist.shape;
    case DurationKind::half_normal:
      // E|N(0, s^2)| = s * sqrt(2/pi)
      return dist.shape * std::sqrt(2.0 / std::numbers::pi);
    case DurationKind::uniform:
      return dist.shape / 2.0;
    case DurationKind::exponential:
      return 1.0 / dist.shape;
  }
  throw ConfigError("unknown duration kind");
}

double sample_duration(const DurationDist& dist, PrngStream& rng) {
  const double mean = duration_mean(dist);  // also validates shape
  if (dist.kind == DurationKind::constant) {
    return dist.normalize_mean ? 1.0 : dist.shape;
  }
  for (;;) {
    double x = 0.0;
    switch (dist.kind) {
      case DurationKind::half_normal:
        x = std::abs(dist.shape * rng.next_normal());
        break;
      case DurationKind::uniform:
        x = dist.shape * rng.next_unit();
        break;
      case DurationKind::exponential:
        x = rng.next_exponential() / dist.shape;
        break;
      case DurationKind::constant:
        break;  // handled above
    }
    if (dist.normalize_mean) x /= mean;
    // Zero has probability ~2^-53 per draw but the contract says strictly
    // positive, so resample rather than clamp.
    if (x > 0.0) return x;
  }
}

DurationKind duration_kind_from_string(const std::string& s) {
  if (s == "constant") return DurationKind::constant;
  if (s == "half_normal") return DurationKind::half_normal;
  if (s == "uniform") return DurationKind::uniform;
  if (s == "exponential") return DurationKind::exponential;
  throw ConfigError("unknown duration kind: " + s);
}

std::string to_string(DurationKind kind) {
  switch (kind) {
    case DurationKind::constant: return "constant";
    case DurationKind::half_normal: return "half_normal";
    case DurationKind::uniform: return "uniform";
    case DurationKind::exponential: return "exponential";
  }
  return "?";
}

}  // namespace fedsim
