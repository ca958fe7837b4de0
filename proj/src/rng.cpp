#include "brd/rng.hpp"

#include <algorithm>

namespace brd {

std::size_t Rng::categorical_from_cdf(std::span<const double> cdf) {
  const double target = uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
  // target < cdf.back() always, but trailing zero-mass entries share the last
  // value; clamp to the last index with positive mass.
  if (it == cdf.end()) {
    auto last = cdf.size() - 1;
    while (last > 0 && cdf[last - 1] == cdf.back()) --last;
    return last;
  }
  return static_cast<std::size_t>(it - cdf.begin());
}

std::uint64_t Rng::mix(std::uint64_t z) {
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix(mix(seed) ^ (stream * 0xd1b54a32d192ed03ULL));
}

}  // namespace brd
