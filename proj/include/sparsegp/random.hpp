#pragma once

#include <cstdint>
#include <random>

namespace sparsegp {

/// Seeded random stream used everywhere randomness enters the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard <random> distributions are implementation-defined,
/// so every transform below is written out explicitly; a given seed therefore
/// reproduces the same numbers with any conforming standard library.
///
///   uniform()      53-bit mantissa fill, open interval (0, 1)
///   normal()       Marsaglia polar method, spare value cached
///   rademacher()   sign taken from the top engine bit
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }
  bool bernoulli(double p) { return uniform() < p; }
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; derives independent child seeds from (seed, tags...).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag);

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
  ((seed = mix_seed(seed, static_cast<std::uint64_t>(tags))), ...);
  return seed;
}

}  // namespace sparsegp
