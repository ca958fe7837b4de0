#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>

#include "brd/core.hpp"
#include "brd/rng.hpp"

namespace brd::sampler {

struct AcceptedSample {
  std::size_t action_index = 0;
  std::uint64_t attempts = 1;
};

inline constexpr std::uint64_t kDefaultAttemptCap = 1'000'000'000ULL;

class SamplingBudgetExceeded : public std::runtime_error {
 public:
  explicit SamplingBudgetExceeded(std::uint64_t attempts)
      : std::runtime_error("sampling budget exceeded after " + std::to_string(attempts) +
                           " attempts"),
        attempts_(attempts) {}
  std::uint64_t attempts() const { return attempts_; }

 private:
  std::uint64_t attempts_;
};

/// Tightest admissible aspiration level: max_x U(x, y).
double aspiration_level(std::span<const double> utility_column);

/// Draws x ~ prior and u ~ U[0,1) until log u <= beta (U(x,y) - aspiration).
/// Accepted actions follow the Boltzmann posterior of the prior. Consumes the
/// stream in the order (action draw, acceptance draw) per attempt.
AcceptedSample rejection_sample(const Distribution& prior,
                                std::span<const double> utility_column, Beta beta,
                                double aspiration, Rng& rng,
                                std::uint64_t attempt_cap = kDefaultAttemptCap);

/// s(y) = exp(beta T(y)) / Z(y): mean number of attempts until acceptance.
double expected_attempts(const Distribution& prior, std::span<const double> utility_column,
                         Beta beta, double aspiration);

/// S = sum_y p(y) s(y) with T(y) = aspiration_level of each column.
double average_attempts(const Distribution& env_dist, const Distribution& prior,
                        const UtilityTable& utility, Beta beta);

}  // namespace brd::sampler
