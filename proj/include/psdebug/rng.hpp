#ifndef PSDEBUG_RNG_HPP
#define PSDEBUG_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace psdebug {

/// Deterministic random stream. All sampling in the library goes through this
/// class instead of std:: distributions, whose output sequences are
/// implementation-defined; mt19937_64 itself is fully specified, so results
/// are reproducible across platforms and standard libraries.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(mix(seed, 0)) {}

  /// Stream derived from (seed, stream_id). Distinct ids give decorrelated
  /// streams, so work can be partitioned without sharing engine state.
  RandomStream(std::uint64_t seed, std::uint64_t stream_id)
      : engine_(mix(seed, stream_id)) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (cosine branch only; two uniforms per draw).
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  /// Unbiased integer in [0, bound) via rejection.
  std::uint64_t uniform_below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return r % bound;
  }

  std::uint64_t bits() { return engine_(); }

 private:
  static constexpr double kPi = 3.14159265358979323846;

  // SplitMix64 finalizer; decorrelates (seed, stream) pairs before seeding.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::mt19937_64 engine_;
};

/// In-place Fisher-Yates shuffle driven by a RandomStream.
template <typename T>
void shuffle(std::vector<T>& values, RandomStream& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_below(i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace psdebug

#endif  // PSDEBUG_RNG_HPP
