#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brd/adapt.hpp"
#include "brd/ba.hpp"
#include "brd/core.hpp"

namespace brd::harness {

struct ExperimentSpec {
  std::size_t n_actions = 10;
  std::size_t n_envs = 5;
  std::optional<Distribution> env_dist;  // nullopt: uniform over environments
  std::vector<double> betas{1.0, 3.0, 10.0};
  double alpha = 0.05;
  std::size_t iterations = 200000;
  std::vector<std::uint64_t> seeds;
  std::size_t metrics_stride = 100;
  std::uint64_t utility_seed = 1;
  ba::SolveOptions solve_options{1e-12, 100000};
  std::uint64_t attempt_cap = sampler::kDefaultAttemptCap;
  std::size_t workers = 0;  // 0: BRD_WORKERS or hardware concurrency

  /// 10 actions, 5 environments, alpha 0.05, betas {1, 3, 10}, seeds 1..20.
  static ExperimentSpec defaults();

  void validate() const;
  Distribution resolved_env_dist() const;
};

struct FinalPrior {
  double beta = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> probs;
};

struct Diagnostic {
  enum class Kind { kNotConverged, kSamplingBudget };
  Kind kind;
  double beta = 0.0;
  std::optional<std::uint64_t> seed;
  std::string message;
};

struct ExperimentResult {
  UtilityTable utility{1, 1, 0.0};
  std::vector<double> reference_betas;
  std::vector<ba::RateDistortionSolution> references;  // parallel to reference_betas
  std::vector<adapt::MetricsRow> rows;                 // ordered by (beta, seed, iteration)
  std::vector<FinalPrior> final_priors;                // ordered by (beta, seed)
  std::vector<Diagnostic> diagnostics;

  bool has_sampling_failure() const;
};

/// n_actions x n_envs table of i.i.d. Uniform[0,1) entries, filled action by
/// action from Rng(seed).
UtilityTable random_utility(std::size_t n_actions, std::size_t n_envs, std::uint64_t seed);

/// Runs the protocol on random_utility(spec.n_actions, spec.n_envs, spec.utility_seed).
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Runs the protocol on a given table; its shape overrides spec.n_actions/n_envs.
ExperimentResult run_experiment(const ExperimentSpec& spec, const UtilityTable& utility);

struct Stat {
  double mean = 0.0;
  double se = 0.0;
};

struct SummaryRow {
  double beta = 0.0;
  std::size_t iteration = 0;
  std::size_t n_seeds = 0;
  Stat kl_to_optimal;
  Stat avg_attempts;
  Stat avg_utility;
  Stat objective_j;
};

/// Mean and standard error across seeds for each (beta, iteration), ordered by
/// first appearance of beta and then by iteration.
std::vector<SummaryRow> summarize(const std::vector<adapt::MetricsRow>& rows);

std::size_t resolve_workers(std::size_t requested);

}  // namespace brd::harness
