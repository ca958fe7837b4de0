#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace brd {

// Raised for malformed inputs: bad weights, shape mismatches, out-of-range indices.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// KL(p||q) with p[i] > 0 where q[i] == 0.
class InfiniteDivergence : public std::domain_error {
 public:
  explicit InfiniteDivergence(std::size_t index)
      : std::domain_error("infinite divergence: p has mass at index " +
                          std::to_string(index) + " where q is zero"),
        index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Normalized probability vector over a finite set. Entries are
/// non-negative and sum to one within 1e-12.
class Distribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  /// Validates `probs` as-is; does not renormalize.
  explicit Distribution(std::vector<double> probs);

  static Distribution uniform(std::size_t n);

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }

  bool operator==(const Distribution&) const = default;

 private:
  std::vector<double> probs_;
};

/// Payoff table U(x, y) with actions as rows and environments as columns.
/// Stored environment-major so that a column is contiguous.
class UtilityTable {
 public:
  /// `rows[x][y]` is the payoff of action x in environment y.
  static UtilityTable from_rows(const std::vector<std::vector<double>>& rows);

  UtilityTable(std::size_t n_actions, std::size_t n_envs, double fill);

  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_envs() const { return n_envs_; }

  double operator()(std::size_t action, std::size_t env) const {
    return values_[env * n_actions_ + action];
  }
  void set(std::size_t action, std::size_t env, double value);

  std::span<const double> column(std::size_t env) const {
    return {values_.data() + env * n_actions_, n_actions_};
  }

  bool operator==(const UtilityTable&) const = default;

 private:
  std::size_t n_actions_;
  std::size_t n_envs_;
  std::vector<double> values_;
};

/// Unconstrained natural parameters of a categorical distribution over
/// size()+1 outcomes. Outcome 0 is the reference with its parameter fixed at 0,
/// so theta[i] = log(p[i+1] / p[0]).
class SoftmaxParams {
 public:
  explicit SoftmaxParams(std::vector<double> theta);

  static SoftmaxParams zeros(std::size_t n_outcomes);

  std::size_t size() const { return theta_.size(); }
  std::size_t n_outcomes() const { return theta_.size() + 1; }
  double operator[](std::size_t i) const { return theta_[i]; }
  std::span<const double> values() const { return theta_; }

  /// psi(theta) = log(1 + sum_i exp(theta_i)).
  double log_normalizer() const;

  bool operator==(const SoftmaxParams&) const = default;

 private:
  std::vector<double> theta_;
};

/// Inverse temperature trading utility against information cost. Strictly
/// positive and finite.
class Beta {
 public:
  explicit Beta(double value);
  double value() const { return value_; }
  double inverse() const { return 1.0 / value_; }

 private:
  double value_;
};

Distribution normalize(std::span<const double> weights);

/// Relative entropy in nats, with 0 log 0 = 0. Throws InfiniteDivergence if
/// the support of p is not contained in that of q.
double kl_divergence(const Distribution& p, const Distribution& q);

/// log(sum(exp(values))) evaluated with a max shift.
double log_sum_exp(std::span<const double> values);

Distribution softmax_prior(const SoftmaxParams& params);

/// Score function d/dtheta log p_theta(action): onehot(action)[1:] - p[1:].
std::vector<double> log_prob_gradient(const SoftmaxParams& params,
                                      std::size_t action);

/// Same as above with p_theta already evaluated.
std::vector<double> log_prob_gradient(const Distribution& prior,
                                      std::size_t action);

/// Expected utility of `posterior` minus (1/beta) KL(posterior || prior).
double free_energy(const Distribution& posterior, const Distribution& prior,
                   std::span<const double> utility_column, Beta beta);

/// Environment-averaged free energy of per-environment conditionals against a
/// shared prior.
double rate_distortion_objective(const std::vector<Distribution>& conditionals,
                                 const Distribution& prior,
                                 const Distribution& env_dist,
                                 const UtilityTable& utility, Beta beta);

/// Expected utility sum_y p(y) sum_x p(x|y) U(x,y).
double expected_utility(const std::vector<Distribution>& conditionals,
                        const Distribution& env_dist,
                        const UtilityTable& utility);

double max_abs_difference(std::span<const double> a, std::span<const double> b);

}  // namespace brd
