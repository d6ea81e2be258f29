#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fedsim {

// Counter-based splittable PRNG (SplitMix64 with a per-stream gamma).
//
// A stream is fully determined by (seed, stream_id): the state starts at a
// hash of the seed and advances by a per-stream odd increment derived from
// the stream id, with the usual SplitMix64 output finalizer. Everything is
// 64-bit integer arithmetic, so sequences are identical across platforms.
//
// fork(label) derives a child stream from (seed, stream_id, label) without
// consuming any draws from the parent; sibling labels give statistically
// independent streams. This is the only sanctioned way to hand randomness
// to a sub-component (per-client data, per-task training noise, ...), and
// it keeps every consumer reproducible in isolation.
class PrngStream {
 public:
  explicit PrngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed),
        stream_id_(stream_id),
        state_(mix64(seed + kGolden)),
        gamma_(mix64(stream_id + kGolden) | 1ULL) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64() {
    state_ += gamma_;
    return mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe to feed into log().
  double next_unit_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. No caching of the second variate, so the
  // draw count per call is fixed and replay stays aligned.
  double next_normal() {
    const double u1 = next_unit_pos();
    const double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Exponential with unit rate.
  double next_exponential() { return -std::log(next_unit_pos()); }

  // Unbiased integer in [0, bound) via rejection of the biased tail.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Child stream keyed by (seed, stream_id, label). Does not advance *this.
  PrngStream fork(std::uint64_t label) const {
    return PrngStream(seed_, mix64(stream_id_ + kGolden + mix64(label + 1)));
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  // SplitMix64 output finalizer (Stafford mix 13).
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;
  std::uint64_t gamma_;
};

}  // namespace fedsim
