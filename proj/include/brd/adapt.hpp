#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "brd/ba.hpp"
#include "brd/core.hpp"
#include "brd/rng.hpp"
#include "brd/sampler.hpp"

namespace brd::adapt {

/// Direction of the convergence metric reported in MetricsRow::kl_to_optimal.
inline constexpr const char* kKlDirection = "KL(optimal || p_theta)";

struct AdaptationConfig {
  double alpha = 0.05;
  Beta beta{1.0};
  std::size_t iterations = 1;
  std::uint64_t seed = 0;
  std::size_t metrics_stride = 1;
  SoftmaxParams theta_init{{}};
  std::uint64_t attempt_cap = sampler::kDefaultAttemptCap;

  void validate(std::size_t n_actions) const;
};

/// One snapshot of an adaptation run. All metrics are analytic functionals of
/// the current parameters.
struct MetricsRow {
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  double kl_to_optimal = 0.0;
  double avg_attempts = 0.0;
  double avg_utility = 0.0;
  double objective_j = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

struct AdaptationTrace {
  std::vector<MetricsRow> rows;
  SoftmaxParams final_theta{{}};
};

/// Thrown when an adaptation run exhausts its sampling budget. Carries the
/// rows recorded before the failure.
class AdaptationAborted : public std::runtime_error {
 public:
  AdaptationAborted(AdaptationTrace partial, std::size_t failed_iteration,
                    std::uint64_t attempts);
  const AdaptationTrace& partial() const { return partial_; }
  std::size_t failed_iteration() const { return failed_iteration_; }
  std::uint64_t attempts() const { return attempts_; }

 private:
  AdaptationTrace partial_;
  std::size_t failed_iteration_;
  std::uint64_t attempts_;
};

struct StepResult {
  SoftmaxParams theta;
  sampler::AcceptedSample sample;
  std::size_t env_index;
};

/// theta + (alpha / beta) grad log p_theta(action).
SoftmaxParams apply_update(const SoftmaxParams& theta, std::size_t action, double alpha,
                           Beta beta);

/// Draws y ~ env_dist, then an accepted action from p_theta(x|y) by rejection
/// sampling, and takes one score-function ascent step.
StepResult adapt_step(const SoftmaxParams& theta, const UtilityTable& utility,
                      const Distribution& env_dist, double alpha, Beta beta, Rng& rng,
                      std::uint64_t attempt_cap = sampler::kDefaultAttemptCap);

struct GradientEstimate {
  std::vector<double> mean;
  std::vector<double> standard_error;
};

/// Mean of n_samples single-sample estimates (1/beta) grad log p_theta(x'),
/// with y' ~ env_dist and x' ~ p_theta(x|y').
GradientEstimate estimate_gradient(const SoftmaxParams& theta, const UtilityTable& utility,
                                   const Distribution& env_dist, Beta beta,
                                   std::size_t n_samples, Rng& rng,
                                   std::uint64_t attempt_cap = sampler::kDefaultAttemptCap);

/// Analytic metrics at `theta`; beta/seed/iteration are left for the caller.
MetricsRow evaluate_metrics(const SoftmaxParams& theta, const UtilityTable& utility,
                            const Distribution& env_dist, Beta beta,
                            const Distribution& optimal_prior);

/// Iterates adapt_step, recording a MetricsRow every metrics_stride steps.
AdaptationTrace run_adaptation(const UtilityTable& utility, const Distribution& env_dist,
                               const AdaptationConfig& config,
                               const ba::RateDistortionSolution& reference);

}  // namespace brd::adapt
