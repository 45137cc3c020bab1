#pragma once

#include <cstdint>
#include <random>

namespace deephash {

/// Seeded pseudo-random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All derived draws (uniform reals, bounded integers, Gaussians)
/// are computed here rather than through <random> distributions, whose
/// algorithms differ between standard library implementations. Two
/// generators built from the same seed therefore yield the same stream on
/// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  /// Uniform integer on the closed range [lo, hi] (rejection sampling, unbiased).
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  /// Standard normal variate (Box-Muller, no cached pair).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Independent generator for a named sub-stream, derived with splitmix64.
  Rng derive(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace deephash
