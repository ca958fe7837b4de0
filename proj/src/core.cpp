#include "brd/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace brd {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidArgument(std::string(what) + ": size mismatch (" +
                          std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

void require_shape(const UtilityTable& utility, const Distribution& env_dist,
                   std::size_t n_actions) {
  require_same_size(utility.n_envs(), env_dist.size(), "environment distribution");
  require_same_size(utility.n_actions(), n_actions, "action distribution");
}

}  // namespace

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("distribution must be non-empty");
  double sum = 0.0;
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
      throw InvalidArgument("distribution entries must lie in [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw InvalidArgument("distribution does not sum to 1 (sum = " +
                          std::to_string(sum) + ")");
  }
}

Distribution Distribution::uniform(std::size_t n) {
  if (n == 0) throw InvalidArgument("distribution must be non-empty");
  return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

UtilityTable::UtilityTable(std::size_t n_actions, std::size_t n_envs, double fill)
    : n_actions_(n_actions), n_envs_(n_envs), values_(n_actions * n_envs, fill) {
  if (n_actions == 0 || n_envs == 0) {
    throw InvalidArgument("utility table needs at least one action and one environment");
  }
  if (!std::isfinite(fill)) throw InvalidArgument("utility entries must be finite");
}

UtilityTable UtilityTable::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw InvalidArgument("utility table needs at least one action and one environment");
  }
  UtilityTable table(rows.size(), rows.front().size(), 0.0);
  for (std::size_t x = 0; x < rows.size(); ++x) {
    if (rows[x].size() != table.n_envs()) {
      throw InvalidArgument("utility table rows have unequal lengths");
    }
    for (std::size_t y = 0; y < rows[x].size(); ++y) table.set(x, y, rows[x][y]);
  }
  return table;
}

void UtilityTable::set(std::size_t action, std::size_t env, double value) {
  if (action >= n_actions_ || env >= n_envs_) {
    throw InvalidArgument("utility index out of range");
  }
  if (!std::isfinite(value)) throw InvalidArgument("utility entries must be finite");
  values_[env * n_actions_ + action] = value;
}

SoftmaxParams::SoftmaxParams(std::vector<double> theta) : theta_(std::move(theta)) {
  for (double t : theta_) {
    if (!std::isfinite(t)) throw InvalidArgument("softmax parameters must be finite");
  }
}

SoftmaxParams SoftmaxParams::zeros(std::size_t n_outcomes) {
  if (n_outcomes == 0) throw InvalidArgument("softmax family needs at least one outcome");
  return SoftmaxParams(std::vector<double>(n_outcomes - 1, 0.0));
}

double SoftmaxParams::log_normalizer() const {
  std::vector<double> logits(theta_.size() + 1, 0.0);
  std::copy(theta_.begin(), theta_.end(), logits.begin() + 1);
  return log_sum_exp(logits);
}

Beta::Beta(double value) : value_(value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw InvalidArgument("beta must be positive");
  }
}

Distribution normalize(std::span<const double> weights) {
  if (weights.empty()) throw InvalidArgument("invalid weights: empty");
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("invalid weights: entries must be finite and non-negative");
    }
    total += w;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InvalidArgument("invalid weights: total must be positive and finite");
  }
  std::vector<double> probs(weights.size());
  std::transform(weights.begin(), weights.end(), probs.begin(),
                 [total](double w) { return w / total; });
  return Distribution(std::move(probs));
}

double kl_divergence(const Distribution& p, const Distribution& q) {
  require_same_size(p.size(), q.size(), "kl_divergence");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) throw InfiniteDivergence(i);
    kl += p[i] * std::log(p[i] / q[i]);
  }
  // Rounding can leave a tiny negative value when p == q.
  return std::max(kl, 0.0);
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("log_sum_exp of empty sequence");
  const double shift = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(shift)) throw InvalidArgument("log_sum_exp requires finite values");
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidArgument("log_sum_exp requires finite values");
    sum += std::exp(v - shift);
  }
  return shift + std::log(sum);
}

Distribution softmax_prior(const SoftmaxParams& params) {
  const double psi = params.log_normalizer();
  std::vector<double> probs(params.n_outcomes());
  probs[0] = std::exp(-psi);
  for (std::size_t i = 0; i < params.size(); ++i) probs[i + 1] = std::exp(params[i] - psi);
  // Each entry is exact to a few ulp; dividing by the sum keeps the
  // distribution invariant tight for long parameter vectors.
  const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  for (double& p : probs) p /= sum;
  return Distribution(std::move(probs));
}

std::vector<double> log_prob_gradient(const Distribution& prior, std::size_t action) {
  if (action >= prior.size()) throw InvalidArgument("action index out of range");
  std::vector<double> grad(prior.size() - 1);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = (action == i + 1 ? 1.0 : 0.0) - prior[i + 1];
  }
  return grad;
}

std::vector<double> log_prob_gradient(const SoftmaxParams& params, std::size_t action) {
  if (action >= params.n_outcomes()) throw InvalidArgument("action index out of range");
  return log_prob_gradient(softmax_prior(params), action);
}

double free_energy(const Distribution& posterior, const Distribution& prior,
                   std::span<const double> utility_column, Beta beta) {
  require_same_size(posterior.size(), prior.size(), "free_energy");
  require_same_size(posterior.size(), utility_column.size(), "free_energy utility");
  double utility = 0.0;
  for (std::size_t x = 0; x < posterior.size(); ++x) {
    if (posterior[x] > 0.0) utility += posterior[x] * utility_column[x];
  }
  return utility - beta.inverse() * kl_divergence(posterior, prior);
}

double rate_distortion_objective(const std::vector<Distribution>& conditionals,
                                 const Distribution& prior,
                                 const Distribution& env_dist,
                                 const UtilityTable& utility, Beta beta) {
  require_shape(utility, env_dist, prior.size());
  require_same_size(conditionals.size(), env_dist.size(), "conditionals");
  double total = 0.0;
  for (std::size_t y = 0; y < env_dist.size(); ++y) {
    total += env_dist[y] * free_energy(conditionals[y], prior, utility.column(y), beta);
  }
  return total;
}

double expected_utility(const std::vector<Distribution>& conditionals,
                        const Distribution& env_dist, const UtilityTable& utility) {
  require_same_size(conditionals.size(), env_dist.size(), "conditionals");
  require_same_size(utility.n_envs(), env_dist.size(), "environment distribution");
  double total = 0.0;
  for (std::size_t y = 0; y < env_dist.size(); ++y) {
    require_same_size(conditionals[y].size(), utility.n_actions(), "conditional");
    const auto column = utility.column(y);
    double inner = 0.0;
    for (std::size_t x = 0; x < column.size(); ++x) inner += conditionals[y][x] * column[x];
    total += env_dist[y] * inner;
  }
  return total;
}

double max_abs_difference(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "max_abs_difference");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace brd
