#include "brd/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace brd::adapt {

void AdaptationConfig::validate(std::size_t n_actions) const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
  if (iterations < 1) throw InvalidArgument("iterations must be at least 1");
  if (metrics_stride < 1) throw InvalidArgument("metrics stride must be at least 1");
  if (theta_init.n_outcomes() != n_actions) {
    throw InvalidArgument("initial parameters must have one entry per non-reference action");
  }
  if (attempt_cap < 1) throw InvalidArgument("attempt cap must be at least 1");
}

AdaptationAborted::AdaptationAborted(AdaptationTrace partial, std::size_t failed_iteration,
                                     std::uint64_t attempts)
    : std::runtime_error("adaptation aborted at iteration " +
                         std::to_string(failed_iteration) +
                         ": sampling budget exceeded after " + std::to_string(attempts) +
                         " attempts"),
      partial_(std::move(partial)),
      failed_iteration_(failed_iteration),
      attempts_(attempts) {}

namespace {

SoftmaxParams ascend(const SoftmaxParams& theta, const std::vector<double>& grad,
                     double step) {
  std::vector<double> next(theta.values().begin(), theta.values().end());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += step * grad[i];
  return SoftmaxParams(std::move(next));
}

struct Draw {
  std::size_t env;
  sampler::AcceptedSample sample;
  Distribution prior;
};

Draw draw_decision(const SoftmaxParams& theta, const UtilityTable& utility,
                   const Distribution& env_dist, Beta beta, Rng& rng,
                   std::uint64_t attempt_cap) {
  if (utility.n_envs() != env_dist.size() || utility.n_actions() != theta.n_outcomes()) {
    throw InvalidArgument("shape mismatch between utility table and parameters");
  }
  std::vector<double> env_cdf(env_dist.size());
  std::partial_sum(env_dist.probs().begin(), env_dist.probs().end(), env_cdf.begin());
  const std::size_t env = rng.categorical_from_cdf(env_cdf);

  auto prior = softmax_prior(theta);
  const auto column = utility.column(env);
  const auto sample = sampler::rejection_sample(
      prior, column, beta, sampler::aspiration_level(column), rng, attempt_cap);
  return {env, sample, std::move(prior)};
}

}  // namespace

SoftmaxParams apply_update(const SoftmaxParams& theta, std::size_t action, double alpha,
                           Beta beta) {
  return ascend(theta, log_prob_gradient(theta, action), alpha / beta.value());
}

StepResult adapt_step(const SoftmaxParams& theta, const UtilityTable& utility,
                      const Distribution& env_dist, double alpha, Beta beta, Rng& rng,
                      std::uint64_t attempt_cap) {
  auto draw = draw_decision(theta, utility, env_dist, beta, rng, attempt_cap);
  const auto grad = log_prob_gradient(draw.prior, draw.sample.action_index);
  return {ascend(theta, grad, alpha / beta.value()), draw.sample, draw.env};
}

GradientEstimate estimate_gradient(const SoftmaxParams& theta, const UtilityTable& utility,
                                   const Distribution& env_dist, Beta beta,
                                   std::size_t n_samples, Rng& rng,
                                   std::uint64_t attempt_cap) {
  if (n_samples < 1) throw InvalidArgument("n_samples must be at least 1");
  const std::size_t dim = theta.size();
  std::vector<double> sum(dim, 0.0), sum_sq(dim, 0.0);
  for (std::size_t n = 0; n < n_samples; ++n) {
    const auto draw = draw_decision(theta, utility, env_dist, beta, rng, attempt_cap);
    const auto grad = log_prob_gradient(draw.prior, draw.sample.action_index);
    for (std::size_t i = 0; i < dim; ++i) {
      const double g = beta.inverse() * grad[i];
      sum[i] += g;
      sum_sq[i] += g * g;
    }
  }
  const double count = static_cast<double>(n_samples);
  GradientEstimate out{std::vector<double>(dim), std::vector<double>(dim, 0.0)};
  for (std::size_t i = 0; i < dim; ++i) {
    out.mean[i] = sum[i] / count;
    if (n_samples > 1) {
      const double var = std::max(0.0, (sum_sq[i] - count * out.mean[i] * out.mean[i]) /
                                            (count - 1.0));
      out.standard_error[i] = std::sqrt(var / count);
    }
  }
  return out;
}

MetricsRow evaluate_metrics(const SoftmaxParams& theta, const UtilityTable& utility,
                            const Distribution& env_dist, Beta beta,
                            const Distribution& optimal_prior) {
  const auto prior = softmax_prior(theta);
  const auto posteriors = ba::all_posteriors(prior, utility, beta);
  MetricsRow row;
  row.beta = beta.value();
  row.kl_to_optimal = kl_divergence(optimal_prior, prior);
  row.avg_attempts = sampler::average_attempts(env_dist, prior, utility, beta);
  row.avg_utility = expected_utility(posteriors, env_dist, utility);
  row.objective_j = ba::prior_objective(prior, utility, env_dist, beta);
  return row;
}

AdaptationTrace run_adaptation(const UtilityTable& utility, const Distribution& env_dist,
                               const AdaptationConfig& config,
                               const ba::RateDistortionSolution& reference) {
  config.validate(utility.n_actions());
  if (reference.prior.size() != utility.n_actions()) {
    throw InvalidArgument("reference solution does not match the utility table");
  }
  Rng rng(config.seed);
  AdaptationTrace trace;
  trace.rows.reserve(config.iterations / config.metrics_stride);
  SoftmaxParams theta = config.theta_init;

  for (std::size_t t = 1; t <= config.iterations; ++t) {
    try {
      theta = adapt_step(theta, utility, env_dist, config.alpha, config.beta, rng,
                         config.attempt_cap)
                  .theta;
    } catch (const sampler::SamplingBudgetExceeded& e) {
      trace.final_theta = theta;
      throw AdaptationAborted(std::move(trace), t, e.attempts());
    }
    if (t % config.metrics_stride == 0) {
      auto row = evaluate_metrics(theta, utility, env_dist, config.beta, reference.prior);
      row.seed = config.seed;
      row.iteration = t;
      trace.rows.push_back(row);
    }
  }
  trace.final_theta = std::move(theta);
  return trace;
}

}  // namespace brd::adapt
