#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "brd/ba.hpp"
#include "brd/core.hpp"
#include "brd/rng.hpp"
#include "oracles.hpp"

using namespace brd;
using doctest::Approx;
using oracle::Vec;

namespace {

Vec probs(const Distribution& d) { return oracle::to_vec(d); }

}  // namespace

TEST_SUITE("normalize") {
  TEST_CASE("examples") {
    CHECK(probs(normalize(Vec{2, 2})) == Vec{0.5, 0.5});
    CHECK(probs(normalize(Vec{1, 0, 0})) == Vec{1, 0, 0});
    CHECK(probs(normalize(Vec{1, 3})) == Vec{0.25, 0.75});
  }

  TEST_CASE("invalid weights") {
    CHECK_THROWS_AS(normalize(Vec{0, 0}), InvalidArgument);
    CHECK_THROWS_AS(normalize(Vec{1, -1}), InvalidArgument);
    CHECK_THROWS_AS(normalize(Vec{1, std::numeric_limits<double>::infinity()}),
                    InvalidArgument);
    CHECK_THROWS_AS(normalize(Vec{std::nan("")}), InvalidArgument);
    CHECK_THROWS_AS(normalize(Vec{}), InvalidArgument);
  }
}

TEST_CASE("distribution invariants are enforced at construction") {
  CHECK_NOTHROW(Distribution(Vec{0.25, 0.75}));
  CHECK_THROWS_AS(Distribution(Vec{0.5, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(Distribution(Vec{1.5, -0.5}), InvalidArgument);
  CHECK_THROWS_AS(Distribution(Vec{}), InvalidArgument);
}

TEST_CASE("utility table shape and finiteness") {
  CHECK_THROWS_AS(UtilityTable(0, 3, 0.0), InvalidArgument);
  CHECK_THROWS_AS(UtilityTable(3, 0, 0.0), InvalidArgument);
  UtilityTable u(2, 3, 0.0);
  CHECK_THROWS_AS(u.set(0, 0, std::numeric_limits<double>::quiet_NaN()), InvalidArgument);
  const auto t = UtilityTable::from_rows({{1, 2, 3}, {4, 5, 6}});
  CHECK(t(1, 2) == 6);
  CHECK(t.column(1)[0] == 2);
  CHECK(t.column(1)[1] == 5);
  CHECK_THROWS_AS(UtilityTable::from_rows({{1, 2}, {3}}), InvalidArgument);
}

TEST_CASE("beta must be positive") {
  CHECK_THROWS_AS(Beta(0.0), InvalidArgument);
  CHECK_THROWS_AS(Beta(-1.0), InvalidArgument);
  CHECK_THROWS_AS(Beta(std::numeric_limits<double>::infinity()), InvalidArgument);
  CHECK(Beta(1e-3).value() == 1e-3);
}

TEST_SUITE("kl_divergence") {
  TEST_CASE("examples") {
    const Distribution p(Vec{0.3, 0.7});
    CHECK(kl_divergence(p, p) == 0.0);
    CHECK(kl_divergence(Distribution(Vec{1, 0}), Distribution(Vec{0.5, 0.5})) ==
          Approx(std::log(2.0)).epsilon(1e-15));
    // Direct summation: 0.7311 log(1.4622) + 0.2689 log(0.5378).
    const Vec a{0.7311, 0.2689}, b{0.5, 0.5};
    const double expected = oracle::kl(a, b);
    CHECK(expected == Approx(0.1110).epsilon(1e-3));
    CHECK(kl_divergence(Distribution(a), Distribution(b)) == Approx(expected).epsilon(1e-14));
  }

  TEST_CASE("support violation is reported") {
    try {
      kl_divergence(Distribution(Vec{0.5, 0.5}), Distribution(Vec{1, 0}));
      FAIL("expected InfiniteDivergence");
    } catch (const InfiniteDivergence& e) {
      CHECK(e.index() == 1);
    }
    CHECK_THROWS_AS(kl_divergence(Distribution(Vec{1}), Distribution(Vec{0.5, 0.5})),
                    InvalidArgument);
  }

  TEST_CASE("non-negative, zero only at equality") {
    oracle::Gen gen(11);
    for (int trial = 0; trial < 200; ++trial) {
      const auto p = gen.simplex(6), q = gen.simplex(6);
      const double d = kl_divergence(Distribution(p), Distribution(q));
      CHECK(d >= 0.0);
      CHECK(d > 1e-12);
      CHECK(kl_divergence(Distribution(p), Distribution(p)) <= 1e-12);
    }
  }
}

TEST_SUITE("log_sum_exp") {
  TEST_CASE("examples") {
    CHECK(log_sum_exp(Vec{0, 0}) == Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp(Vec{1000, 1000}) == Approx(1000 + std::log(2.0)).epsilon(1e-15));
    CHECK(log_sum_exp(Vec{0}) == 0.0);
    CHECK(std::isfinite(log_sum_exp(Vec{-700, 700})));
    CHECK_THROWS_AS(log_sum_exp(Vec{}), InvalidArgument);
  }

  TEST_CASE("agrees with the naive formula on [-20, 20]") {
    oracle::Gen gen(3);
    for (int trial = 0; trial < 500; ++trial) {
      Vec v(1 + trial % 12);
      double naive = 0.0;
      for (double& x : v) {
        x = -20.0 + 40.0 * gen.uniform();
        naive += std::exp(x);
      }
      CHECK(std::abs(log_sum_exp(v) - std::log(naive)) < 1e-12);
    }
  }
}

TEST_SUITE("softmax_prior") {
  TEST_CASE("examples") {
    const auto two = softmax_prior(SoftmaxParams(Vec{0}));
    CHECK(two[0] == Approx(0.5).epsilon(1e-15));
    CHECK(two[1] == Approx(0.5).epsilon(1e-15));
    const auto four = softmax_prior(SoftmaxParams(Vec{0, 0, 0}));
    for (double p : four.probs()) CHECK(p == Approx(0.25).epsilon(1e-15));
    // theta_i = log(p_i / p_0)
    const auto skew = softmax_prior(SoftmaxParams(Vec{std::log(3.0)}));
    CHECK(skew[0] == Approx(0.25).epsilon(1e-14));
    CHECK(skew[1] == Approx(0.75).epsilon(1e-14));
    CHECK(SoftmaxParams(Vec{0, 0}).log_normalizer() == Approx(std::log(3.0)).epsilon(1e-15));
  }

  TEST_CASE("normalized with full support for theta in [-30, 30]") {
    oracle::Gen gen(5);
    for (int trial = 0; trial < 300; ++trial) {
      Vec theta(1 + trial % 15);
      for (double& t : theta) t = -30.0 + 60.0 * gen.uniform();
      const auto p = softmax_prior(SoftmaxParams(theta));
      const auto direct = oracle::softmax_with_reference(theta);
      double sum = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p[i] > 0.0);
        CHECK(p[i] == Approx(direct[i]).epsilon(1e-12));
        sum += p[i];
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("rejects non-finite parameters") {
    CHECK_THROWS_AS(SoftmaxParams(Vec{std::numeric_limits<double>::infinity()}),
                    InvalidArgument);
  }
}

TEST_SUITE("log_prob_gradient") {
  TEST_CASE("examples") {
    const SoftmaxParams zero(Vec{0});
    CHECK(log_prob_gradient(zero, 1) == Vec{0.5});
    CHECK(log_prob_gradient(zero, 0) == Vec{-0.5});
    CHECK_THROWS_AS(log_prob_gradient(zero, 2), InvalidArgument);
  }

  TEST_CASE("matches finite differences of log p_theta") {
    oracle::Gen gen(8);
    const auto theta = gen.normals(4);
    for (std::size_t x = 0; x < 5; ++x) {
      const auto g = log_prob_gradient(SoftmaxParams(theta), x);
      for (std::size_t i = 0; i < theta.size(); ++i) {
        auto up = theta, down = theta;
        up[i] += 1e-6;
        down[i] -= 1e-6;
        const double fd = (std::log(oracle::softmax_with_reference(up)[x]) -
                           std::log(oracle::softmax_with_reference(down)[x])) /
                          2e-6;
        CHECK(g[i] == Approx(fd).epsilon(1e-7));
      }
    }
  }

  TEST_CASE("score has zero expectation under p_theta") {
    oracle::Gen gen(21);
    for (int trial = 0; trial < 50; ++trial) {
      const SoftmaxParams params(gen.normals(6));
      const auto p = softmax_prior(params);
      Vec mean(params.size(), 0.0);
      for (std::size_t x = 0; x < p.size(); ++x) {
        const auto g = log_prob_gradient(params, x);
        for (std::size_t i = 0; i < g.size(); ++i) mean[i] += p[x] * g[i];
      }
      CHECK(oracle::max_abs(mean) < 1e-15);
    }
  }

  TEST_CASE("Monte Carlo mean of the score vanishes") {
    oracle::Gen gen(99);
    const SoftmaxParams params(gen.normals(4));
    const auto p = softmax_prior(params);
    std::vector<double> cdf(p.size());
    std::partial_sum(p.probs().begin(), p.probs().end(), cdf.begin());
    Rng rng(7);
    const std::size_t n = 100000;
    Vec sum(params.size(), 0.0), sum_sq(params.size(), 0.0);
    for (std::size_t k = 0; k < n; ++k) {
      const auto g = log_prob_gradient(p, rng.categorical_from_cdf(cdf));
      for (std::size_t i = 0; i < g.size(); ++i) {
        sum[i] += g[i];
        sum_sq[i] += g[i] * g[i];
      }
    }
    for (std::size_t i = 0; i < sum.size(); ++i) {
      const double mean = sum[i] / n;
      const double se = std::sqrt((sum_sq[i] / n - mean * mean) / n);
      CHECK(std::abs(mean) < 4 * se);
    }
  }
}

TEST_SUITE("free_energy") {
  TEST_CASE("examples") {
    const Distribution uniform2(Vec{0.5, 0.5});
    CHECK(free_energy(uniform2, uniform2, Vec{1, 0}, Beta(1)) == Approx(0.5).epsilon(1e-15));
    const Distribution p(Vec{0.2, 0.3, 0.5});
    const Vec u{0.4, -1.0, 2.0};
    CHECK(free_energy(p, p, u, Beta(0.7)) ==
          Approx(0.2 * 0.4 - 0.3 + 1.0).epsilon(1e-15));
    CHECK_THROWS_AS(free_energy(Distribution(Vec{0.5, 0.5}), Distribution(Vec{1, 0}),
                                Vec{1, 0}, Beta(1)),
                    InfiniteDivergence);
  }

  TEST_CASE("Boltzmann posterior maximizes over a grid of posteriors") {
    const Distribution prior(Vec{0.3, 0.7});
    const Vec u{1.0, 0.2};
    const Beta beta(2.0);
    const auto best = oracle::posterior(oracle::to_vec(prior), u, 2.0);
    const double at_best = free_energy(Distribution(best), prior, u, beta);
    double grid_max = -1e300;
    for (int k = 0; k <= 10000; ++k) {
      const double q = k / 10000.0;
      const double f = free_energy(Distribution(Vec{q, 1 - q}), prior, u, beta);
      CHECK(f <= at_best + 1e-12);
      grid_max = std::max(grid_max, f);
    }
    CHECK(at_best - grid_max < 1e-7);
  }
}

TEST_SUITE("rate_distortion_objective") {
  TEST_CASE("conditionals equal to the prior give expected utility under the prior") {
    const auto u = UtilityTable::from_rows({{0.1, 0.9}, {0.6, 0.2}, {0.3, 0.3}});
    const Distribution prior(Vec{0.2, 0.5, 0.3});
    const Distribution env(Vec{0.4, 0.6});
    const double expected = 0.4 * (0.02 + 0.3 + 0.09) + 0.6 * (0.18 + 0.1 + 0.09);
    for (double b : {0.01, 1.0, 50.0}) {
      CHECK(rate_distortion_objective({prior, prior}, prior, env, u, Beta(b)) ==
            Approx(expected).epsilon(1e-14));
    }
  }

  TEST_CASE("single environment reduces to free energy") {
    const auto u = UtilityTable::from_rows({{1.0}, {0.0}});
    const Distribution prior(Vec{0.5, 0.5});
    const Distribution post(Vec{0.8, 0.2});
    CHECK(rate_distortion_objective({post}, prior, Distribution(Vec{1}), u, Beta(1.5)) ==
          free_energy(post, prior, u.column(0), Beta(1.5)));
  }

  TEST_CASE("2x2 instance: grid over posteriors never beats the Boltzmann conditionals") {
    const auto u = UtilityTable::from_rows({{1.0, 0.2}, {0.3, 0.8}});
    const Distribution prior(Vec{0.45, 0.55});
    const Distribution env(Vec{0.6, 0.4});
    const Beta beta(3.0);
    const auto optimal = ba::all_posteriors(prior, u, beta);
    const double at_opt = rate_distortion_objective(optimal, prior, env, u, beta);
    double grid_max = -1e300;
    for (int i = 0; i <= 400; ++i) {
      for (int j = 0; j <= 400; ++j) {
        const double a = i / 400.0, b = j / 400.0;
        const double v = rate_distortion_objective(
            {Distribution(Vec{a, 1 - a}), Distribution(Vec{b, 1 - b})}, prior, env, u, beta);
        grid_max = std::max(grid_max, v);
      }
    }
    CHECK(grid_max <= at_opt + 1e-12);
    CHECK(at_opt - grid_max < 1e-4);
    // Closed form at the optimum: (1/beta) sum_y p(y) log Z(y).
    const Vec p = oracle::to_vec(prior);
    const double closed = (0.6 * std::log(oracle::partition(p, {1.0, 0.3}, 3.0)) +
                           0.4 * std::log(oracle::partition(p, {0.2, 0.8}, 3.0))) /
                          3.0;
    CHECK(at_opt == Approx(closed).epsilon(1e-13));
  }

  TEST_CASE("equals the parametric objective at the Boltzmann conditionals") {
    oracle::Gen gen(17);
    for (int trial = 0; trial < 25; ++trial) {
      const auto u = gen.utility(10, 5);
      const Distribution env(gen.simplex(5));
      const SoftmaxParams theta(gen.normals(9));
      const Beta beta(0.2 + 5.0 * gen.uniform());
      const auto prior = softmax_prior(theta);
      const double rd =
          rate_distortion_objective(ba::all_posteriors(prior, u, beta), prior, env, u, beta);
      CHECK(std::abs(rd - ba::parametric_objective(theta, u, env, beta)) < 1e-10);
    }
  }

  TEST_CASE("shape mismatches are rejected") {
    const auto u = UtilityTable::from_rows({{1.0, 0.2}, {0.3, 0.8}});
    const Distribution prior(Vec{0.5, 0.5});
    CHECK_THROWS_AS(
        rate_distortion_objective({prior}, prior, Distribution(Vec{0.5, 0.5}), u, Beta(1)),
        InvalidArgument);
    CHECK_THROWS_AS(rate_distortion_objective({prior, prior}, Distribution(Vec{1.0}),
                                              Distribution(Vec{0.5, 0.5}), u, Beta(1)),
                    InvalidArgument);
  }
}

TEST_CASE("rng: seeded streams repeat and split streams differ") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  auto child = c.split();
  CHECK(child.next_u64() != Rng(42).next_u64());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  const Vec cdf{0.0, 0.5, 0.5, 1.0};  // outcomes 0 and 2 have zero mass
  for (int i = 0; i < 1000; ++i) {
    const auto k = a.categorical_from_cdf(cdf);
    CHECK((k == 1 || k == 3));
  }
}
