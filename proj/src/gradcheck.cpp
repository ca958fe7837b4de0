#include "brd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "brd/adapt.hpp"
#include "brd/ba.hpp"
#include "brd/sampler.hpp"

namespace brd::gradcheck {

std::vector<double> finite_difference_gradient(const SoftmaxParams& params,
                                               const UtilityTable& utility,
                                               const Distribution& env_dist, Beta beta,
                                               double h) {
  std::vector<double> grad(params.size());
  std::vector<double> theta(params.values().begin(), params.values().end());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double up = ba::parametric_objective(SoftmaxParams(theta), utility, env_dist, beta);
    theta[i] = saved - h;
    const double down = ba::parametric_objective(SoftmaxParams(theta), utility, env_dist, beta);
    theta[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                      double floor) {
  double diff = 0.0, scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

namespace {

double standard_normal(Rng& rng) {
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::vector<TrialReport> run(const UtilityTable& utility, const Distribution& env_dist,
                             Beta beta, const Options& options) {
  Rng rng(options.seed);
  std::vector<TrialReport> reports;
  for (std::size_t t = 0; t < options.trials; ++t) {
    TrialReport report;
    report.theta.resize(utility.n_actions() - 1);
    for (double& v : report.theta) v = standard_normal(rng);
    const SoftmaxParams params(report.theta);

    const auto analytic = ba::analytic_gradient(params, utility, env_dist, beta);
    const auto fd = finite_difference_gradient(params, utility, env_dist, beta);
    report.fd_relative_error = relative_error(analytic, fd);

    report.expected_attempts =
        sampler::average_attempts(env_dist, softmax_prior(params), utility, beta);
    const double cost = report.expected_attempts * static_cast<double>(options.samples);
    report.sampling_infeasible = !(cost <= options.max_total_attempts);

    // Expected number of samples on the rarer side of each score component.
    // Below a handful the normal approximation behind the z-score breaks down.
    const auto prior = softmax_prior(params);
    std::vector<double> marginal(utility.n_actions(), 0.0);
    for (std::size_t y = 0; y < utility.n_envs(); ++y) {
      const auto post = ba::boltzmann_posterior(prior, utility.column(y), beta).distribution;
      for (std::size_t x = 0; x < marginal.size(); ++x) marginal[x] += env_dist[y] * post[x];
    }
    double rarest = std::numeric_limits<double>::infinity();
    for (std::size_t x = 1; x < marginal.size(); ++x) {
      rarest = std::min(rarest, std::min(marginal[x], 1.0 - marginal[x]));
    }
    report.min_expected_count = rarest * static_cast<double>(options.samples);
    report.posterior_degenerate = report.min_expected_count < options.min_expected_count;

    if (!report.sampling_infeasible && options.samples > 0) {
      Rng mc_rng = rng.split();
      const auto estimate =
          adapt::estimate_gradient(params, utility, env_dist, beta, options.samples, mc_rng);
      double worst = 0.0;
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double diff = std::abs(estimate.mean[i] - analytic[i]);
        const double se = estimate.standard_error[i];
        const double z = se > 0.0 ? diff / se
                                  : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        worst = std::max(worst, z);
      }
      report.mc_max_z = worst;
    }

    report.passed = !report.sampling_infeasible && !report.posterior_degenerate &&
                    report.fd_relative_error < options.fd_threshold &&
                    (!report.mc_max_z || *report.mc_max_z < options.z_threshold);
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace brd::gradcheck
