#include "brd/ba.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace brd::ba {

namespace {

void require_column(const Distribution& prior, std::span<const double> column) {
  if (prior.size() != column.size()) {
    throw InvalidArgument("utility column length does not match the prior");
  }
}

void require_shape(const UtilityTable& utility, const Distribution& env_dist,
                   std::size_t n_actions) {
  if (utility.n_envs() != env_dist.size() || utility.n_actions() != n_actions) {
    throw InvalidArgument("shape mismatch between utility table and distributions");
  }
}

// log p(x) + beta U(x,y) on the support of the prior; -inf elsewhere.
std::vector<double> tilted_log_weights(const Distribution& prior,
                                       std::span<const double> column, Beta beta) {
  std::vector<double> logw(prior.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t x = 0; x < prior.size(); ++x) {
    if (prior[x] > 0.0) logw[x] = std::log(prior[x]) + beta.value() * column[x];
  }
  return logw;
}

double support_log_sum_exp(const std::vector<double>& logw) {
  std::vector<double> finite;
  finite.reserve(logw.size());
  for (double v : logw) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  return log_sum_exp(finite);
}

}  // namespace

Posterior boltzmann_posterior(const Distribution& prior,
                              std::span<const double> utility_column, Beta beta) {
  require_column(prior, utility_column);
  const auto logw = tilted_log_weights(prior, utility_column, beta);
  const double log_z = support_log_sum_exp(logw);
  std::vector<double> weights(prior.size(), 0.0);
  for (std::size_t x = 0; x < prior.size(); ++x) {
    if (std::isfinite(logw[x])) weights[x] = std::exp(logw[x] - log_z);
  }
  return {normalize(weights), log_z};
}

double log_partition(const Distribution& prior, std::span<const double> utility_column,
                     Beta beta) {
  require_column(prior, utility_column);
  return support_log_sum_exp(tilted_log_weights(prior, utility_column, beta));
}

Distribution marginal_update(const Distribution& env_dist,
                             const std::vector<Distribution>& conditionals) {
  if (conditionals.size() != env_dist.size() || conditionals.empty()) {
    throw InvalidArgument("need one conditional per environment");
  }
  std::vector<double> mixture(conditionals.front().size(), 0.0);
  for (std::size_t y = 0; y < conditionals.size(); ++y) {
    if (conditionals[y].size() != mixture.size()) {
      throw InvalidArgument("conditionals have unequal lengths");
    }
    for (std::size_t x = 0; x < mixture.size(); ++x) {
      mixture[x] += env_dist[y] * conditionals[y][x];
    }
  }
  return normalize(mixture);
}

std::vector<Distribution> all_posteriors(const Distribution& prior,
                                         const UtilityTable& utility, Beta beta) {
  std::vector<Distribution> out;
  out.reserve(utility.n_envs());
  for (std::size_t y = 0; y < utility.n_envs(); ++y) {
    out.push_back(boltzmann_posterior(prior, utility.column(y), beta).distribution);
  }
  return out;
}

Residuals self_consistency(const UtilityTable& utility, const Distribution& env_dist,
                           Beta beta, const Distribution& prior,
                           const std::vector<Distribution>& conditionals) {
  require_shape(utility, env_dist, prior.size());
  if (conditionals.size() != env_dist.size()) {
    throw InvalidArgument("need one conditional per environment");
  }
  Residuals r;
  for (std::size_t y = 0; y < conditionals.size(); ++y) {
    const auto expected = boltzmann_posterior(prior, utility.column(y), beta);
    r.posterior = std::max(r.posterior, max_abs_difference(conditionals[y].probs(),
                                                           expected.distribution.probs()));
  }
  r.marginal = max_abs_difference(prior.probs(),
                                  marginal_update(env_dist, conditionals).probs());
  return r;
}

std::vector<double> update_factors(const Distribution& prior, const UtilityTable& utility,
                                   const Distribution& env_dist, Beta beta) {
  require_shape(utility, env_dist, prior.size());
  std::vector<double> log_z(utility.n_envs());
  for (std::size_t y = 0; y < log_z.size(); ++y) {
    log_z[y] = log_partition(prior, utility.column(y), beta);
  }
  std::vector<double> factors(prior.size());
  std::vector<double> terms(utility.n_envs());
  for (std::size_t x = 0; x < factors.size(); ++x) {
    for (std::size_t y = 0; y < terms.size(); ++y) {
      terms[y] = env_dist[y] > 0.0 ? std::log(env_dist[y]) + beta.value() * utility(x, y) - log_z[y]
                                   : -std::numeric_limits<double>::infinity();
    }
    factors[x] = std::exp(log_sum_exp(terms));
  }
  return factors;
}

double optimality_gap(const Distribution& prior, const UtilityTable& utility,
                      const Distribution& env_dist, Beta beta) {
  const auto c = update_factors(prior, utility, env_dist, beta);
  return (*std::max_element(c.begin(), c.end()) - 1.0) * beta.inverse();
}

Distribution sweep(const Distribution& prior, const UtilityTable& utility,
                   const Distribution& env_dist, Beta beta) {
  const auto mixture = marginal_update(env_dist, all_posteriors(prior, utility, beta));
  std::vector<double> floored(mixture.probs().begin(), mixture.probs().end());
  bool clipped = false;
  for (std::size_t x = 0; x < floored.size(); ++x) {
    double& p = floored[x];
    if (p > 0.0 && p < kPriorFloor && p < prior[x]) {
      p = 0.0;
      clipped = true;
    }
  }
  return clipped ? normalize(floored) : mixture;
}

RateDistortionSolution solve(const UtilityTable& utility, const Distribution& env_dist,
                             Beta beta, SolveOptions options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (options.max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  require_shape(utility, env_dist, utility.n_actions());

  auto prior = Distribution::uniform(utility.n_actions());
  std::size_t iterations = 0;
  bool converged = false;
  while (iterations < options.max_iter) {
    auto next = sweep(prior, utility, env_dist, beta);
    ++iterations;
    const double change = max_abs_difference(next.probs(), prior.probs());
    prior = std::move(next);
    if (change < options.tol && optimality_gap(prior, utility, env_dist, beta) <= options.tol) {
      converged = true;
      break;
    }
  }

  auto conditionals = all_posteriors(prior, utility, beta);
  const auto residuals = self_consistency(utility, env_dist, beta, prior, conditionals);
  const double objective =
      rate_distortion_objective(conditionals, prior, env_dist, utility, beta);
  const double gap = optimality_gap(prior, utility, env_dist, beta);
  return {std::move(prior), std::move(conditionals), objective, iterations, converged,
          residuals.max(), gap};
}

double prior_objective(const Distribution& prior, const UtilityTable& utility,
                       const Distribution& env_dist, Beta beta) {
  require_shape(utility, env_dist, prior.size());
  double total = 0.0;
  for (std::size_t y = 0; y < env_dist.size(); ++y) {
    total += env_dist[y] * log_partition(prior, utility.column(y), beta);
  }
  return beta.inverse() * total;
}

double parametric_objective(const SoftmaxParams& params, const UtilityTable& utility,
                            const Distribution& env_dist, Beta beta) {
  return prior_objective(softmax_prior(params), utility, env_dist, beta);
}

std::vector<double> analytic_gradient(const SoftmaxParams& params,
                                      const UtilityTable& utility,
                                      const Distribution& env_dist, Beta beta) {
  const auto prior = softmax_prior(params);
  require_shape(utility, env_dist, prior.size());

  std::vector<std::vector<double>> scores;
  scores.reserve(prior.size());
  for (std::size_t x = 0; x < prior.size(); ++x) scores.push_back(log_prob_gradient(prior, x));

  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t y = 0; y < env_dist.size(); ++y) {
    const auto post = boltzmann_posterior(prior, utility.column(y), beta).distribution;
    for (std::size_t x = 0; x < prior.size(); ++x) {
      const double w = env_dist[y] * post[x];
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += w * scores[x][i];
    }
  }
  for (double& g : grad) g *= beta.inverse();
  return grad;
}

}  // namespace brd::ba
