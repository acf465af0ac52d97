#pragma once

#include <cmath>
#include <cstdint>

namespace dpfl {

/// Counter-based random stream keyed by (seed, agent, iteration).
///
/// Draws are a pure function of the key and a draw counter, so identical
/// stream ids reproduce identical values regardless of which thread runs the
/// agent, and per-agent streams can be consumed concurrently without sharing
/// state.
class RngStream {
 public:
  explicit RngStream(uint64_t key) : state_(key) {}

  RngStream(uint64_t seed, uint64_t agent, uint64_t iteration)
      : state_(derive_key(seed, agent, iteration)) {}

  static uint64_t derive_key(uint64_t seed, uint64_t agent, uint64_t iteration) {
    uint64_t h = mix(seed ^ 0x6a09e667f3bcc909ULL);
    h = mix(h ^ mix(agent + 0xbb67ae8584caa73bULL));
    h = mix(h ^ mix(iteration + 0x3c6ef372fe94f82bULL));
    return h;
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  /// Uniform draw strictly inside (0, 1).
  double next_unit() {
    uint64_t bits = next_u64() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  /// Laplace(0, scale) by inverse CDF. scale == 0 yields exactly 0 but still
  /// consumes one draw so streams stay aligned across scales.
  double next_laplace(double scale) {
    double v = next_unit() - 0.5;
    if (scale == 0.0) return 0.0;
    double mag = -std::log1p(-2.0 * std::fabs(v));
    return v < 0.0 ? -scale * mag : scale * mag;
  }

  /// N(0, stddev^2) by Box-Muller; consumes two draws per value.
  double next_gaussian(double stddev) {
    double u1 = next_unit();
    double u2 = next_unit();
    if (stddev == 0.0) return 0.0;
    double r = std::sqrt(-2.0 * std::log(u1));
    return stddev * r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

}  // namespace dpfl
