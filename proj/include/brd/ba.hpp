#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "brd/core.hpp"

namespace brd::ba {

struct Posterior {
  Distribution distribution;
  double log_partition;  // log Z(y) = log sum_x p(x) exp(beta U(x,y))
};

/// p(x|y) proportional to p(x) exp(beta U(x,y)). Actions with zero prior mass
/// are excluded from the partition sum and keep zero posterior mass.
Posterior boltzmann_posterior(const Distribution& prior,
                              std::span<const double> utility_column, Beta beta);

/// log Z(y) alone, without materializing the posterior.
double log_partition(const Distribution& prior, std::span<const double> utility_column,
                     Beta beta);

/// Mixture sum_y p(y) p(x|y).
Distribution marginal_update(const Distribution& env_dist,
                             const std::vector<Distribution>& conditionals);

std::vector<Distribution> all_posteriors(const Distribution& prior,
                                         const UtilityTable& utility, Beta beta);

struct Residuals {
  double posterior = 0.0;  // max_y max_x |p(x|y) - Boltzmann posterior of prior|
  double marginal = 0.0;   // max_x |p(x) - sum_y p(y) p(x|y)|
  double max() const { return posterior > marginal ? posterior : marginal; }
};

/// Self-consistency residuals of a candidate (prior, conditionals) pair.
Residuals self_consistency(const UtilityTable& utility, const Distribution& env_dist,
                           Beta beta, const Distribution& prior,
                           const std::vector<Distribution>& conditionals);

struct SolveOptions {
  double tol = 1e-10;
  std::size_t max_iter = 100000;
};

struct RateDistortionSolution {
  Distribution prior;
  std::vector<Distribution> conditionals;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;
  double optimality_gap = 0.0;  // upper bound on J* - objective
};

/// Prior entries that fall below this while shrinking are set to zero after
/// each marginal step. Growing entries are kept so they can recover.
inline constexpr double kPriorFloor = 1e-300;

/// c(x) = sum_y p(y) exp(beta U(x,y)) / Z(y), the factor a sweep multiplies
/// p(x) by. Defined for every action, including those with zero prior mass.
std::vector<double> update_factors(const Distribution& prior, const UtilityTable& utility,
                                   const Distribution& env_dist, Beta beta);

/// (max_x c(x) - 1) / beta. By concavity of the objective in the prior this
/// bounds J* - J(prior) from above; it is zero exactly at the optimum.
double optimality_gap(const Distribution& prior, const UtilityTable& utility,
                      const Distribution& env_dist, Beta beta);

/// One Blahut-Arimoto sweep: posteriors of `prior`, then their mixture
/// (floored and renormalized).
Distribution sweep(const Distribution& prior, const UtilityTable& utility,
                   const Distribution& env_dist, Beta beta);

/// Blahut-Arimoto iteration from the uniform prior until the L-infinity change
/// of the prior between sweeps drops below `tol` and the optimality gap is at
/// most `tol`. The second test matters when an action the optimum needs has
/// decayed to a tiny mass: its absolute change is negligible while it regrows.
/// Non-convergence is reported through `converged`, not thrown.
RateDistortionSolution solve(const UtilityTable& utility, const Distribution& env_dist,
                             Beta beta, SolveOptions options = {});

/// (1/beta) sum_y p(y) log Z(y): the rate-distortion objective with the
/// conditionals set to the Boltzmann posteriors of `prior`.
double prior_objective(const Distribution& prior, const UtilityTable& utility,
                       const Distribution& env_dist, Beta beta);

double parametric_objective(const SoftmaxParams& params, const UtilityTable& utility,
                            const Distribution& env_dist, Beta beta);

/// Exact gradient (1/beta) sum_y p(y) sum_x p_theta(x|y) grad log p_theta(x).
std::vector<double> analytic_gradient(const SoftmaxParams& params,
                                      const UtilityTable& utility,
                                      const Distribution& env_dist, Beta beta);

}  // namespace brd::ba
