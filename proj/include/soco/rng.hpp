#pragma once

/// @file
/// @brief Counter-based random streams.
///
/// Every draw is a pure function of a (key, counter) pair, so innovation e(t)
/// depends only on (seed, t) and Monte Carlo samples can be generated in any
/// order or on any thread.  The mixing function is the splitmix64 finalizer
/// (Steele, Lea, Flood 2014):
///
///   z += 0x9E3779B97F4A7C15
///   z  = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z  = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   z  =  z ^ (z >> 31)
///
/// These constants are part of the reproducibility contract and must not
/// change between releases.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace soco::rng {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t finalize(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a child key from (key, index).
constexpr std::uint64_t mix(std::uint64_t key, std::uint64_t index) {
  return finalize(key ^ finalize(index + kGolden));
}

/// A splitmix64 stream positioned at mix(key, counter).
class Stream {
 public:
  constexpr Stream(std::uint64_t key, std::uint64_t counter) : state_(mix(key, counter)) {}

  constexpr std::uint64_t next_u64() {
    state_ += kGolden;
    return finalize(state_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Uniform on (-a, a).
  double symmetric(double a) { return a * (2.0 * uniform() - 1.0); }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace soco::rng
