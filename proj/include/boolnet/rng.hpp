#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace boolnet {

// SplitMix64 finalizer; full-period 64-bit avalanche mix.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based random stream: draw i of stream (seed, stream_id) is a pure
// function of (seed, stream_id, i). Coordinate-parallel code can therefore
// consume draws in any schedule and still produce identical results.
//
// Distinct purposes (noise, flips, shuffling, ...) should use distinct
// stream ids; counters only need to be unique within one stream.
class StreamRng {
 public:
  explicit StreamRng(std::uint64_t seed, std::uint64_t stream_id = 0)
      : key_(mix64(mix64(seed + 0x6a09e667f3bcc909ULL) ^
                   mix64(stream_id + 0xbb67ae8584caa73bULL))) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return mix64(key_ ^ mix64(counter));
  }

  // Uniform in [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; consumes counters 2c and 2c+1.
  double normal(std::uint64_t counter) const {
    double u1 = static_cast<double>((bits(2 * counter) >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform(2 * counter + 1);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

}  // namespace boolnet
