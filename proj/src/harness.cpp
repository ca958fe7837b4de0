#include "brd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

#include "brd/rng.hpp"

namespace brd::harness {

ExperimentSpec ExperimentSpec::defaults() {
  ExperimentSpec spec;
  for (std::uint64_t s = 1; s <= 20; ++s) spec.seeds.push_back(s);
  return spec;
}

void ExperimentSpec::validate() const {
  if (n_actions < 2) throw InvalidArgument("experiment needs at least 2 actions");
  if (n_envs < 1) throw InvalidArgument("experiment needs at least 1 environment");
  if (betas.empty()) throw InvalidArgument("experiment needs at least one beta");
  for (double b : betas) Beta{b};
  if (seeds.empty()) throw InvalidArgument("experiment needs at least one seed");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be positive");
  if (iterations < 1) throw InvalidArgument("iterations must be at least 1");
  if (metrics_stride < 1) throw InvalidArgument("metrics stride must be at least 1");
  if (env_dist && env_dist->size() != n_envs) {
    throw InvalidArgument("environment distribution has the wrong length");
  }
}

Distribution ExperimentSpec::resolved_env_dist() const {
  return env_dist ? *env_dist : Distribution::uniform(n_envs);
}

bool ExperimentResult::has_sampling_failure() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) {
    return d.kind == Diagnostic::Kind::kSamplingBudget;
  });
}

UtilityTable random_utility(std::size_t n_actions, std::size_t n_envs, std::uint64_t seed) {
  UtilityTable table(n_actions, n_envs, 0.0);
  Rng rng(seed);
  for (std::size_t x = 0; x < n_actions; ++x) {
    for (std::size_t y = 0; y < n_envs; ++y) table.set(x, y, rng.uniform());
  }
  return table;
}

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BRD_WORKERS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  return run_experiment(spec, random_utility(spec.n_actions, spec.n_envs, spec.utility_seed));
}

namespace {

struct Job {
  std::size_t reference;  // index into ExperimentResult::references
  std::uint64_t seed;
};

struct JobOutput {
  adapt::AdaptationTrace trace;
  std::optional<std::string> failure;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& base, const UtilityTable& utility) {
  ExperimentSpec spec = base;
  spec.n_actions = utility.n_actions();
  spec.n_envs = utility.n_envs();
  spec.validate();
  const auto env_dist = spec.resolved_env_dist();

  ExperimentResult result;
  result.utility = utility;

  std::vector<Job> jobs;
  for (double b : spec.betas) {
    const Beta beta(b);
    auto solution = ba::solve(utility, env_dist, beta, spec.solve_options);
    if (!solution.converged) {
      result.diagnostics.push_back(
          {Diagnostic::Kind::kNotConverged, b, std::nullopt,
           "Blahut-Arimoto did not converge within " + std::to_string(solution.iterations) +
               " sweeps (residual " + std::to_string(solution.residual) + ")"});
      continue;
    }
    result.reference_betas.push_back(b);
    result.references.push_back(std::move(solution));
    for (auto seed : spec.seeds) jobs.push_back({result.references.size() - 1, seed});
  }

  std::vector<JobOutput> outputs(jobs.size());
  auto run_job = [&](std::size_t i) {
    const auto& job = jobs[i];
    adapt::AdaptationConfig config;
    config.alpha = spec.alpha;
    config.beta = Beta(result.reference_betas[job.reference]);
    config.iterations = spec.iterations;
    config.seed = job.seed;
    config.metrics_stride = spec.metrics_stride;
    config.theta_init = SoftmaxParams::zeros(utility.n_actions());
    config.attempt_cap = spec.attempt_cap;
    try {
      outputs[i].trace =
          adapt::run_adaptation(utility, env_dist, config, result.references[job.reference]);
    } catch (const adapt::AdaptationAborted& e) {
      outputs[i].trace = e.partial();
      outputs[i].failure = e.what();
    }
  };

  const std::size_t workers = std::min(resolve_workers(spec.workers), jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(i);
      });
    }
  }

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const double b = result.reference_betas[jobs[i].reference];
    auto& out = outputs[i];
    result.rows.insert(result.rows.end(), out.trace.rows.begin(), out.trace.rows.end());
    const auto prior = softmax_prior(out.trace.final_theta);
    result.final_priors.push_back(
        {b, jobs[i].seed, std::vector<double>(prior.probs().begin(), prior.probs().end())});
    if (out.failure) {
      result.diagnostics.push_back(
          {Diagnostic::Kind::kSamplingBudget, b, jobs[i].seed, *out.failure});
    }
  }
  return result;
}

std::vector<SummaryRow> summarize(const std::vector<adapt::MetricsRow>& rows) {
  if (rows.empty()) throw InvalidArgument("cannot summarize an empty table");

  std::vector<double> beta_order;
  std::map<std::pair<std::size_t, std::size_t>, std::vector<const adapt::MetricsRow*>> groups;
  for (const auto& row : rows) {
    auto it = std::find(beta_order.begin(), beta_order.end(), row.beta);
    if (it == beta_order.end()) it = beta_order.insert(beta_order.end(), row.beta);
    const auto beta_rank = static_cast<std::size_t>(it - beta_order.begin());
    groups[{beta_rank, row.iteration}].push_back(&row);
  }

  auto stat = [](const std::vector<const adapt::MetricsRow*>& group, auto field) {
    const double n = static_cast<double>(group.size());
    double sum = 0.0;
    for (const auto* r : group) sum += r->*field;
    Stat s{sum / n, 0.0};
    if (group.size() > 1) {
      double ss = 0.0;
      for (const auto* r : group) ss += (r->*field - s.mean) * (r->*field - s.mean);
      s.se = std::sqrt(ss / (n - 1.0) / n);
    }
    return s;
  };

  std::vector<SummaryRow> summary;
  summary.reserve(groups.size());
  for (const auto& [key, group] : groups) {
    SummaryRow row;
    row.beta = beta_order[key.first];
    row.iteration = key.second;
    row.n_seeds = group.size();
    row.kl_to_optimal = stat(group, &adapt::MetricsRow::kl_to_optimal);
    row.avg_attempts = stat(group, &adapt::MetricsRow::avg_attempts);
    row.avg_utility = stat(group, &adapt::MetricsRow::avg_utility);
    row.objective_j = stat(group, &adapt::MetricsRow::objective_j);
    summary.push_back(row);
  }
  return summary;
}

}  // namespace brd::harness
