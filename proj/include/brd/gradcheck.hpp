#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brd/core.hpp"
#include "brd/rng.hpp"

namespace brd::gradcheck {

/// Central differences of the parametric objective.
std::vector<double> finite_difference_gradient(const SoftmaxParams& params,
                                               const UtilityTable& utility,
                                               const Distribution& env_dist, Beta beta,
                                               double h = 1e-5);

/// ||a - b||_inf / max(||a||_inf, ||b||_inf, floor). The floor keeps the ratio
/// meaningful when both gradients vanish.
double relative_error(const std::vector<double>& a, const std::vector<double>& b,
                      double floor = 1e-4);

struct TrialReport {
  std::vector<double> theta;
  double fd_relative_error = 0.0;
  std::optional<double> mc_max_z;  // empty when Monte Carlo was skipped
  double expected_attempts = 0.0;  // S at theta
  bool sampling_infeasible = false;
  double min_expected_count = 0.0;   // samples expected on the rarer side of any component
  bool posterior_degenerate = false;  // min_expected_count too small for a z-test
  bool passed = false;
};

struct Options {
  std::size_t trials = 5;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  double fd_threshold = 1e-6;
  double z_threshold = 4.0;
  double max_total_attempts = 1e9;
  double min_expected_count = 10.0;
};

/// Random theta ~ N(0, I) per trial; compares the analytic gradient with finite
/// differences and with the single-sample Monte Carlo estimator. Trials whose
/// expected sampling cost exceeds max_total_attempts skip Monte Carlo and fail.
/// Trials where some action is too rare under the posterior marginal for a
/// z-test still run Monte Carlo but fail as degenerate.
std::vector<TrialReport> run(const UtilityTable& utility, const Distribution& env_dist,
                             Beta beta, const Options& options);

}  // namespace brd::gradcheck
