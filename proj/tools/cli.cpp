#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "brd/ba.hpp"
#include "brd/gradcheck.hpp"
#include "brd/harness.hpp"
#include "brd/io.hpp"
#include "brd/sampler.hpp"
#include "json.hpp"

namespace brd::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Raised for bad flag values detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      out.push_back(io::parse_double(item));
    } catch (const io::FormatError&) {
      throw UsageError("invalid number in list: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

// "1,2,5-8" -> 1 2 5 6 7 8
std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  auto to_u64 = [](const std::string& s) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw UsageError("invalid seed: '" + s + "'");
    return v;
  };
  for (std::string item; std::getline(ss, item, ',');) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_u64(item));
      continue;
    }
    const auto lo = to_u64(item.substr(0, dash));
    const auto hi = to_u64(item.substr(dash + 1));
    if (hi < lo) throw UsageError("invalid seed range: '" + item + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw UsageError("empty seed list");
  return out;
}

Distribution load_env_dist(const std::optional<std::string>& path, std::size_t n_envs) {
  if (!path) return Distribution::uniform(n_envs);
  auto dist = io::parse_env_dist_csv(io::read_file(*path));
  if (dist.size() != n_envs) {
    throw io::FormatError("environment distribution has " + std::to_string(dist.size()) +
                          " entries but the utility table has " + std::to_string(n_envs) +
                          " environments");
  }
  return dist;
}

// ---------------------------------------------------------------------------

struct GenUtilityArgs {
  std::size_t actions = 0;
  std::size_t envs = 0;
  std::uint64_t seed = 0;
  std::string out;
};

int gen_utility(const GenUtilityArgs& a, std::ostream& out) {
  if (a.actions < 1 || a.envs < 1) throw UsageError("--actions and --envs must be at least 1");
  const auto table = harness::random_utility(a.actions, a.envs, a.seed);
  const auto csv = io::format_utility_csv(table);
  io::write_file_atomic(a.out, csv);
  out << io::sha256_hex(csv) << "  " << a.out << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

struct SolveArgs {
  std::string utility;
  double beta = 0.0;
  std::optional<std::string> env_dist;
  double tol = 1e-10;
  std::size_t max_iter = 100000;
  std::string out;
};

int solve(const SolveArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.beta > 0.0) || !std::isfinite(a.beta)) throw UsageError("beta must be positive");
  if (!(a.tol > 0.0)) throw UsageError("tol must be positive");
  if (a.max_iter < 1) throw UsageError("max-iter must be at least 1");
  const auto utility = io::parse_utility_csv(io::read_file(a.utility));
  const auto env_dist = load_env_dist(a.env_dist, utility.n_envs());
  const Beta beta(a.beta);
  const ba::SolveOptions options{a.tol, a.max_iter};
  const auto solution = ba::solve(utility, env_dist, beta, options);
  io::write_file_atomic(
      a.out, io::format_solution_json(io::to_solution_file(solution, beta, env_dist, options)));
  out << "objective " << io::format_double(solution.objective) << "\niterations "
      << solution.iterations << "\nconverged " << (solution.converged ? "true" : "false")
      << "\nresidual " << io::format_double(solution.residual) << "\noptimality_gap "
      << io::format_double(solution.optimality_gap) << '\n';
  if (!solution.converged) {
    err << "warning: Blahut-Arimoto did not converge within " << solution.iterations
        << " sweeps\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

struct VerifyArgs {
  std::string utility;
  std::string solution;
  double threshold = 1e-8;
};

int verify(const VerifyArgs& a, std::ostream& out) {
  const auto utility = io::parse_utility_csv(io::read_file(a.utility));
  const auto file = io::parse_solution_json(io::read_file(a.solution));
  const std::size_t n_x = utility.n_actions(), n_y = utility.n_envs();
  if (file.prior.size() != n_x || file.conditionals.size() != n_y || file.env_dist.size() != n_y) {
    throw io::FormatError("solution shape does not match the utility table");
  }
  for (const auto& c : file.conditionals) {
    if (c.size() != n_x) throw io::FormatError("solution shape does not match the utility table");
  }
  if (!(file.beta > 0.0)) throw io::FormatError("solution beta must be positive");
  const Beta beta(file.beta);
  const Distribution env_dist(file.env_dist);

  // The stored vectors are checked as written: a prior that no longer sums to
  // one must show up as a marginal residual, not a parse failure.
  const auto prior = normalize(file.prior);
  double posterior_residual = 0.0;
  std::vector<double> mixture(n_x, 0.0);
  for (std::size_t y = 0; y < n_y; ++y) {
    const auto expected = ba::boltzmann_posterior(prior, utility.column(y), beta).distribution;
    posterior_residual = std::max(
        posterior_residual, max_abs_difference(file.conditionals[y], expected.probs()));
    for (std::size_t x = 0; x < n_x; ++x) mixture[x] += env_dist[y] * file.conditionals[y][x];
  }
  const double marginal_residual = max_abs_difference(file.prior, mixture);

  double objective = std::numeric_limits<double>::quiet_NaN();
  try {
    std::vector<Distribution> conditionals;
    for (const auto& c : file.conditionals) conditionals.emplace_back(normalize(c));
    objective = rate_distortion_objective(conditionals, prior, env_dist, utility, beta);
  } catch (const InfiniteDivergence&) {
    objective = -std::numeric_limits<double>::infinity();
  }

  const bool pass = posterior_residual < a.threshold && marginal_residual < a.threshold;
  out << "posterior_residual " << io::format_double(posterior_residual) << '\n'
      << "marginal_residual " << io::format_double(marginal_residual) << '\n'
      << "objective " << io::format_double(objective) << '\n'
      << "stored_objective " << io::format_double(file.objective) << '\n'
      << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

struct GradcheckArgs {
  std::string utility;
  double beta = 0.0;
  std::optional<std::string> env_dist;
  gradcheck::Options options;
};

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  if (!(a.beta > 0.0) || !std::isfinite(a.beta)) throw UsageError("beta must be positive");
  if (a.options.trials < 1) throw UsageError("trials must be at least 1");
  const auto utility = io::parse_utility_csv(io::read_file(a.utility));
  if (utility.n_actions() < 2) throw UsageError("gradient check needs at least 2 actions");
  const auto env_dist = load_env_dist(a.env_dist, utility.n_envs());
  const auto reports = gradcheck::run(utility, env_dist, Beta(a.beta), a.options);

  bool all_pass = true;
  out << "trial,fd_rel_error,mc_max_z,avg_attempts,min_expected_count,status\n";
  for (std::size_t t = 0; t < reports.size(); ++t) {
    const auto& r = reports[t];
    std::string status = r.passed ? "pass" : "fail";
    if (r.posterior_degenerate) status = "degenerate-posterior";
    if (r.sampling_infeasible) status = "infeasible-sampling";
    all_pass = all_pass && r.passed;
    out << t << ',' << io::format_double(r.fd_relative_error) << ','
        << (r.mc_max_z ? io::format_double(*r.mc_max_z) : std::string("skipped")) << ','
        << io::format_double(r.expected_attempts) << ','
        << io::format_double(r.min_expected_count) << ',' << status << '\n';
  }
  out << "thresholds fd_rel_error<" << io::format_double(a.options.fd_threshold)
      << " mc_max_z<" << io::format_double(a.options.z_threshold)
      << " min_expected_count>=" << io::format_double(a.options.min_expected_count) << '\n'
      << (all_pass ? "PASS" : "FAIL") << '\n';
  return all_pass ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

struct AdaptArgs {
  std::string utility;
  std::optional<std::string> env_dist;
  std::string betas = "1,3,10";
  double alpha = 0.05;
  std::size_t iters = 200000;
  std::string seeds = "1-20";
  std::size_t stride = 100;
  double tol = 1e-12;
  std::size_t max_iter = 100000;
  std::uint64_t attempt_cap = sampler::kDefaultAttemptCap;
  std::size_t workers = 0;
  std::string out_dir;
  std::optional<std::string> manifest;
};

ordered_json adapt_config_json(const AdaptArgs& a) {
  ordered_json c;
  c["utility"] = a.utility;
  c["env_dist"] = a.env_dist ? ordered_json(*a.env_dist) : ordered_json(nullptr);
  c["betas"] = a.betas;
  c["alpha"] = a.alpha;
  c["iters"] = a.iters;
  c["seeds"] = a.seeds;
  c["stride"] = a.stride;
  c["tol"] = a.tol;
  c["max_iter"] = a.max_iter;
  c["attempt_cap"] = a.attempt_cap;
  return c;
}

// Replaces the run configuration with the one recorded in a manifest.
void load_manifest(AdaptArgs& a) {
  ordered_json m;
  try {
    m = ordered_json::parse(io::read_file(*a.manifest));
    const auto& c = m.at("config");
    a.utility = c.at("utility").get<std::string>();
    a.env_dist = c.at("env_dist").is_null()
                     ? std::nullopt
                     : std::optional<std::string>(c.at("env_dist").get<std::string>());
    a.betas = c.at("betas").get<std::string>();
    a.alpha = c.at("alpha").get<double>();
    a.iters = c.at("iters").get<std::size_t>();
    a.seeds = c.at("seeds").get<std::string>();
    a.stride = c.at("stride").get<std::size_t>();
    a.tol = c.at("tol").get<double>();
    a.max_iter = c.at("max_iter").get<std::size_t>();
    a.attempt_cap = c.at("attempt_cap").get<std::uint64_t>();
  } catch (const ordered_json::exception& e) {
    throw io::FormatError(std::string("malformed manifest: ") + e.what());
  }
  const auto digest = io::sha256_hex(io::read_file(a.utility));
  if (digest != m.at("utility_sha256").get<std::string>()) {
    throw io::FormatError("utility file " + a.utility + " does not match the manifest digest");
  }
}

int adapt(AdaptArgs a, std::ostream& out, std::ostream& err) {
  if (a.manifest) load_manifest(a);
  if (a.utility.empty()) throw UsageError("--utility is required (or --manifest)");
  a.utility = fs::absolute(a.utility).string();
  if (a.env_dist) a.env_dist = fs::absolute(*a.env_dist).string();

  harness::ExperimentSpec spec;
  spec.betas = parse_double_list(a.betas);
  for (double b : spec.betas) {
    if (!(b > 0.0) || !std::isfinite(b)) throw UsageError("beta must be positive");
  }
  if (!(a.alpha > 0.0)) throw UsageError("alpha must be positive");
  if (a.iters < 1) throw UsageError("iters must be at least 1");
  if (a.stride < 1) throw UsageError("stride must be at least 1");
  spec.alpha = a.alpha;
  spec.iterations = a.iters;
  spec.seeds = parse_seed_list(a.seeds);
  spec.metrics_stride = a.stride;
  spec.solve_options = {a.tol, a.max_iter};
  spec.attempt_cap = a.attempt_cap;
  spec.workers = a.workers;

  const auto utility_bytes = io::read_file(a.utility);
  const auto utility = io::parse_utility_csv(utility_bytes);
  if (utility.n_actions() < 2) throw UsageError("adaptation needs at least 2 actions");
  spec.env_dist = load_env_dist(a.env_dist, utility.n_envs());

  const auto result = harness::run_experiment(spec, utility);

  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  const auto metrics = io::format_metrics_csv(result.rows);
  const auto finals = io::format_final_priors_csv(result.final_priors);
  const auto summary =
      result.rows.empty() ? std::string() : io::format_summary_csv(harness::summarize(result.rows));
  std::vector<harness::FinalPrior> optimal;
  for (std::size_t i = 0; i < result.references.size(); ++i) {
    const auto& p = result.references[i].prior.probs();
    optimal.push_back({result.reference_betas[i], 0, {p.begin(), p.end()}});
  }
  const auto optimal_csv = io::format_final_priors_csv(optimal);
  io::write_file_atomic(dir / "metrics.csv", metrics);
  io::write_file_atomic(dir / "final_priors.csv", finals);
  io::write_file_atomic(dir / "summary.csv", summary);
  io::write_file_atomic(dir / "optimal_priors.csv", optimal_csv);

  ordered_json manifest;
  manifest["tool"] = "brd";
  manifest["version"] = kVersion;
  manifest["command"] = "adapt";
  manifest["config"] = adapt_config_json(a);
  manifest["utility_sha256"] = io::sha256_hex(utility_bytes);
  manifest["timestamp"] = utc_timestamp();
  manifest["kl_direction"] = adapt::kKlDirection;
  manifest["theta_init"] = "zeros (uniform prior)";
  manifest["rng"] =
      "mt19937_64 seeded with the run seed; per step: environment draw, then "
      "(action, acceptance) draws per attempt";
  manifest["notes"] =
      "default betas {1,3,10} and uniform environment distribution are implementation "
      "defaults";
  const bool budget_failure = result.has_sampling_failure();
  manifest["status"] = budget_failure ? "sampling_budget_exceeded" : "ok";
  auto& diags = manifest["diagnostics"] = ordered_json::array();
  for (const auto& d : result.diagnostics) {
    ordered_json j;
    j["kind"] = d.kind == harness::Diagnostic::Kind::kNotConverged ? "not_converged"
                                                                   : "sampling_budget_exceeded";
    j["beta"] = d.beta;
    j["seed"] = d.seed ? ordered_json(*d.seed) : ordered_json(nullptr);
    j["message"] = d.message;
    diags.push_back(j);
    err << "warning: " << d.message << '\n';
  }
  ordered_json outputs;
  outputs["metrics.csv"] = io::sha256_hex(metrics);
  outputs["final_priors.csv"] = io::sha256_hex(finals);
  outputs["summary.csv"] = io::sha256_hex(summary);
  outputs["optimal_priors.csv"] = io::sha256_hex(optimal_csv);
  manifest["outputs"] = outputs;
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + '\n');

  out << "wrote " << result.rows.size() << " metric rows to " << (dir / "metrics.csv").string()
      << '\n';
  return budget_failure ? kBudgetExceeded : kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bounded-rational decision making: exact rate-distortion solver and "
               "sampling-based prior adaptation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenUtilityArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-utility", "Write a random Uniform[0,1) utility table");
  gen_cmd->add_option("--actions", gen.actions, "Number of actions")->required();
  gen_cmd->add_option("--envs", gen.envs, "Number of environments")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->required();
  gen_cmd->add_option("--out", gen.out, "Output CSV path")->required();

  SolveArgs sol;
  auto* solve_cmd = app.add_subcommand("solve", "Blahut-Arimoto solution as JSON");
  solve_cmd->add_option("--utility", sol.utility, "Utility CSV")->required();
  solve_cmd->add_option("--beta", sol.beta, "Resource parameter (> 0)")->required();
  solve_cmd->add_option("--env-dist", sol.env_dist, "Environment distribution CSV");
  solve_cmd->add_option("--tol", sol.tol, "Convergence tolerance on the prior")
      ->capture_default_str();
  solve_cmd->add_option("--max-iter", sol.max_iter, "Maximum sweeps")->capture_default_str();
  solve_cmd->add_option("--out", sol.out, "Output JSON path")->required();

  AdaptArgs ad;
  auto* adapt_cmd = app.add_subcommand("adapt", "Sampling-based prior adaptation runs");
  adapt_cmd->add_option("--utility", ad.utility, "Utility CSV");
  adapt_cmd->add_option("--env-dist", ad.env_dist, "Environment distribution CSV");
  adapt_cmd->add_option("--betas", ad.betas, "Comma-separated betas")->capture_default_str();
  adapt_cmd->add_option("--alpha", ad.alpha, "Learning rate")->capture_default_str();
  adapt_cmd->add_option("--iters", ad.iters, "Iterations per run")->capture_default_str();
  adapt_cmd->add_option("--seeds", ad.seeds, "Seeds, e.g. 1-20 or 1,4,9")->capture_default_str();
  adapt_cmd->add_option("--stride", ad.stride, "Metrics stride")->capture_default_str();
  adapt_cmd->add_option("--tol", ad.tol, "Reference solver tolerance")->capture_default_str();
  adapt_cmd->add_option("--max-iter", ad.max_iter, "Reference solver sweeps")
      ->capture_default_str();
  adapt_cmd->add_option("--attempt-cap", ad.attempt_cap, "Rejection sampling attempt cap")
      ->capture_default_str();
  adapt_cmd->add_option("--workers", ad.workers, "Parallel runs (0: BRD_WORKERS or cores)");
  adapt_cmd->add_option("--manifest", ad.manifest, "Re-run the configuration in a manifest");
  adapt_cmd->add_option("--out-dir", ad.out_dir, "Output directory")->required();

  GradcheckArgs gc;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Check analytic, finite-difference and "
                                                   "Monte Carlo gradients");
  grad_cmd->add_option("--utility", gc.utility, "Utility CSV")->required();
  grad_cmd->add_option("--beta", gc.beta, "Resource parameter (> 0)")->required();
  grad_cmd->add_option("--env-dist", gc.env_dist, "Environment distribution CSV");
  grad_cmd->add_option("--trials", gc.options.trials, "Random parameter draws")
      ->capture_default_str();
  grad_cmd->add_option("--samples", gc.options.samples, "Monte Carlo samples per trial")
      ->capture_default_str();
  grad_cmd->add_option("--seed", gc.options.seed, "Random seed")->capture_default_str();

  VerifyArgs ver;
  auto* verify_cmd = app.add_subcommand("verify", "Check a solution's self-consistency");
  verify_cmd->add_option("--utility", ver.utility, "Utility CSV")->required();
  verify_cmd->add_option("--solution", ver.solution, "Solution JSON")->required();

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*gen_cmd) return gen_utility(gen, out);
    if (*solve_cmd) return solve(sol, out, err);
    if (*adapt_cmd) return adapt(ad, out, err);
    if (*grad_cmd) return run_gradcheck(gc, out);
    if (*verify_cmd) return verify(ver, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const io::FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const sampler::SamplingBudgetExceeded& e) {
    err << "error: " << e.what() << '\n';
    return kBudgetExceeded;
  }
  return kUsageError;
}

}  // namespace brd::cli
