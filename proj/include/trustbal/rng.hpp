#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace trustbal {

// Deterministic, seedable random stream: PCG64 (XSL-RR, "setseq" variant).
//
// Streams are addressed by (seed, stream_id).  The same pair always yields
// the same draw sequence; distinct stream_ids select distinct LCG increments
// and give statistically independent sequences.  The pipeline owns one
// stream per replicate, so results do not depend on scheduling order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    const u128 initstate =
        (u128(splitmix64(seed)) << 64) | splitmix64(seed + 0x9e3779b97f4a7c15ULL);
    const u128 initseq = (u128(splitmix64(stream_id ^ 0xda3e39cb94b95bdbULL)) << 64) |
                         splitmix64(stream_id + 0x2545f4914f6cdd1dULL);
    inc_ = (initseq << 1) | 1;
    state_ = 0;
    next_u64();
    state_ += initstate;
    next_u64();
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() {
    state_ = state_ * kMultiplier + inc_;
    const auto hi = static_cast<std::uint64_t>(state_ >> 64);
    const auto lo = static_cast<std::uint64_t>(state_);
    const int rot = static_cast<int>(state_ >> 122);
    const std::uint64_t x = hi ^ lo;
    return (x >> rot) | (x << ((-rot) & 63));
  }

  // Uniform on (0,1): 53-bit mantissa, never exactly 0 or 1.
  double u01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via the Marsaglia polar method.  The paired draw is
  // cached, so consumption alternates 1-or-0 uniform pairs per call; the
  // cache is part of the stream state and stays deterministic.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * u01() - 1.0;
      v = 2.0 * u01() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  // Gamma(shape, scale 1), Marsaglia–Tsang squeeze method.
  double gamma(double shape) {
    if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be > 0");
    if (shape < 1.0) {
      // Boost to shape+1 and shrink back.
      const double g = gamma(shape + 1.0);
      return g * std::pow(u01(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = u01();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double chi_squared(double df) { return 2.0 * gamma(0.5 * df); }

 private:
  using u128 = unsigned __int128;

  static constexpr u128 kMultiplier =
      (u128(2549297995355413924ULL) << 64) | 4865540595714422341ULL;

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  u128 state_{0};
  u128 inc_{1};
  std::uint64_t seed_{0};
  std::uint64_t stream_id_{0};
  double spare_{0.0};
  bool has_spare_{false};
};

// Derives an unrelated seed from (seed, domain); used to keep the stream
// spaces of different pipeline stages disjoint.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t domain) {
  std::uint64_t x = seed ^ (domain * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace trustbal
