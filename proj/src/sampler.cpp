#include "brd/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "brd/ba.hpp"

namespace brd::sampler {

double aspiration_level(std::span<const double> utility_column) {
  if (utility_column.empty()) throw InvalidArgument("empty utility column");
  return *std::max_element(utility_column.begin(), utility_column.end());
}

AcceptedSample rejection_sample(const Distribution& prior,
                                std::span<const double> utility_column, Beta beta,
                                double aspiration, Rng& rng, std::uint64_t attempt_cap) {
  if (prior.size() != utility_column.size()) {
    throw InvalidArgument("utility column length does not match the prior");
  }
  if (!std::isfinite(aspiration) || aspiration < aspiration_level(utility_column)) {
    throw InvalidArgument("aspiration level must be at least max utility of the column");
  }
  std::vector<double> cdf(prior.size());
  std::partial_sum(prior.probs().begin(), prior.probs().end(), cdf.begin());

  for (std::uint64_t attempt = 1; attempt <= attempt_cap; ++attempt) {
    const std::size_t x = rng.categorical_from_cdf(cdf);
    const double u = rng.uniform();
    // log(0) = -inf is always accepted; u = 0 has probability 2^-53.
    if (std::log(u) <= beta.value() * (utility_column[x] - aspiration)) {
      return {x, attempt};
    }
  }
  throw SamplingBudgetExceeded(attempt_cap);
}

double expected_attempts(const Distribution& prior, std::span<const double> utility_column,
                         Beta beta, double aspiration) {
  if (!std::isfinite(aspiration) || aspiration < aspiration_level(utility_column)) {
    throw InvalidArgument("aspiration level must be at least max utility of the column");
  }
  return std::exp(beta.value() * aspiration - ba::log_partition(prior, utility_column, beta));
}

double average_attempts(const Distribution& env_dist, const Distribution& prior,
                        const UtilityTable& utility, Beta beta) {
  if (env_dist.size() != utility.n_envs() || prior.size() != utility.n_actions()) {
    throw InvalidArgument("shape mismatch between utility table and distributions");
  }
  double total = 0.0;
  for (std::size_t y = 0; y < env_dist.size(); ++y) {
    const auto column = utility.column(y);
    total += env_dist[y] * expected_attempts(prior, column, beta, aspiration_level(column));
  }
  return total;
}

}  // namespace brd::sampler
