#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace brd {

/// Seedable 64-bit random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; uniform and categorical draws are
/// implemented here rather than through <random> distributions so the same
/// seed gives the same samples on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Index drawn from unnormalized-safe cumulative weights (last entry is the total).
  std::size_t categorical_from_cdf(std::span<const double> cdf);

  /// Independent child stream; advances this stream by one draw.
  Rng split() { return Rng(mix(engine_())); }

  /// Deterministic seed derivation for named sub-streams.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

 private:
  static std::uint64_t mix(std::uint64_t z);

  std::mt19937_64 engine_;
};

}  // namespace brd
