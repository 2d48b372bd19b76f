#pragma once

#include <cstdint>
#include <random>

namespace tgssl {

/// Deterministic random source. The engine is std::mt19937_64 (fully
/// specified by the standard); all distribution transforms are implemented
/// here so that a given seed produces the same draws on every platform and
/// standard library. Never use std::*_distribution on top of this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent substream derived from (seed, stream). Used to give each
  /// video / epoch its own generator so parallel generation stays
  /// order-independent.
  static Rng stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Box-Muller normal draw.
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Knuth multiplication method; fine for the small rates used here.
  int poisson(double mean);

  /// Marsaglia-Tsang for shape >= 1, with the standard boost for shape < 1.
  double gamma(double shape);

  /// Beta via the two-gamma ratio.
  double beta(double alpha, double beta);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used for seed mixing.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace tgssl
