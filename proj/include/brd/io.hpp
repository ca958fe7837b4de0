#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "brd/adapt.hpp"
#include "brd/ba.hpp"
#include "brd/core.hpp"
#include "brd/harness.hpp"

namespace brd::io {

// Unreadable, unwritable, or malformed files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal form that parses back to the same double (at most 17
/// significant digits).
std::string format_double(double value);
double parse_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Lowercase hex SHA-256 of `bytes`.
std::string sha256_hex(std::string_view bytes);

// Utility CSV: header env_0,...,env_{M-1}; one row per action.
std::string format_utility_csv(const UtilityTable& utility);
UtilityTable parse_utility_csv(std::string_view text);

// Environment distribution: one probability per line, optional non-numeric header.
std::string format_env_dist_csv(const Distribution& env_dist);
Distribution parse_env_dist_csv(std::string_view text);

inline constexpr const char* kMetricsHeader =
    "beta,seed,iteration,kl_to_optimal,avg_attempts,avg_utility,objective_j";

std::string format_metrics_csv(const std::vector<adapt::MetricsRow>& rows);
std::vector<adapt::MetricsRow> parse_metrics_csv(std::string_view text);

/// beta,seed,p_0,...,p_{n-1}
std::string format_final_priors_csv(const std::vector<harness::FinalPrior>& priors);

/// beta,iteration,n_seeds, then mean and se for each metric.
std::string format_summary_csv(const std::vector<harness::SummaryRow>& rows);

/// Solution JSON: beta, env_dist, tol, max_iter, prior, conditionals,
/// objective, iterations, converged, residual.
struct SolutionFile {
  double beta = 0.0;
  std::vector<double> env_dist;
  double tol = 0.0;
  std::size_t max_iter = 0;
  std::vector<double> prior;
  std::vector<std::vector<double>> conditionals;
  double objective = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  double residual = 0.0;
};

SolutionFile to_solution_file(const ba::RateDistortionSolution& solution, Beta beta,
                              const Distribution& env_dist, const ba::SolveOptions& options);
std::string format_solution_json(const SolutionFile& solution);
SolutionFile parse_solution_json(std::string_view text);

}  // namespace brd::io
