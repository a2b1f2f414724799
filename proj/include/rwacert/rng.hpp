#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace rwacert {

// Random source used everywhere in the project.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. All transforms (uniform doubles, Box-Muller normals, Knuth
// Poisson, bounded integers) are implemented here rather than taken from
// <random> distributions, whose algorithms are implementation-defined, so a
// seed produces the same stream with any conforming standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the Box-Muller transform; the second value of each
  // pair is cached for the next call.
  double normal();

  // Poisson variate by Knuth's product-of-uniforms method. Intended for the
  // small means used here (event counts, unit-rate noise).
  int poisson(double mean);

  // Unbiased integer in [0, n) by rejection; n must be > 0.
  std::size_t index(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Child seed derivation: mix64(mix64(root + G*(stream+1)) + G*(counter+1))
// with G = 0x9E3779B97F4A7C15. Streams name a purpose (series generation,
// envelope sampling, shuffling, ...), counters enumerate draws within it.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                          std::uint64_t counter = 0) noexcept;

// Fixed stream identifiers; changing one changes every derived artifact.
namespace streams {
inline constexpr std::uint64_t kSeries = 1;
inline constexpr std::uint64_t kSplit = 2;
inline constexpr std::uint64_t kTrainC = 3;
inline constexpr std::uint64_t kTrainD = 4;
inline constexpr std::uint64_t kSampling = 5;
inline constexpr std::uint64_t kEnvelope = 6;
inline constexpr std::uint64_t kLadder = 7;
inline constexpr std::uint64_t kCertify = 8;
}  // namespace streams

}  // namespace rwacert
