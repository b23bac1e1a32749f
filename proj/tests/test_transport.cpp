#include <doctest.h>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "tabsyn/errors.hpp"
#include "tabsyn/marginals.hpp"
#include "tabsyn/rng.hpp"
#include "tabsyn/synth.hpp"
#include "tabsyn/transport.hpp"

using namespace tabsyn;
using namespace fixtures;

namespace {

std::vector<double> random_weights(Rng& rng, std::size_t n) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (double& x : w) {
    x = rng.uniform(0.05, 1.0);
    sum += x;
  }
  for (double& x : w) x /= sum;
  return w;
}

// Cost entries in [0, 2] with occasional exact zeros to exercise degenerate
// pivots.
std::vector<double> random_cost(Rng& rng, std::size_t m, std::size_t n) {
  std::vector<double> c(m * n);
  for (double& x : c) x = rng.below(10) == 0 ? 0.0 : rng.uniform(0.0, 2.0);
  return c;
}

MarginalDistribution numeric_points(const std::vector<double>& values,
                                    const std::vector<double>& weights) {
  MarginalDistribution d;
  d.variable.attr_indices = {0};
  d.support = values;
  d.weights = weights;
  d.source_rows = values.size();
  return d;
}

}  // namespace

TEST_CASE("transport of a distribution onto itself costs nothing") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_weights(rng, 1 + rng.below(8));
    std::vector<double> cost(p.size() * p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        cost[i * p.size() + j] = i == j ? 0.0 : rng.uniform(0.1, 2.0);
      }
    }
    auto result = transport_exact(p, p, cost);
    CHECK(result.distance == doctest::Approx(0.0).epsilon(1e-12));
  }
}

TEST_CASE("categorical transport equals total variation distance") {
  std::vector<double> p = {0.6, 0.4};
  std::vector<double> q = {0.4, 0.6};
  std::vector<double> cost = {0.0, 1.0, 1.0, 0.0};
  auto result = transport_exact(p, q, cost);
  CHECK(result.distance == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(result.distance ==
        doctest::Approx(oracles::transport_lp(p, q, cost)).epsilon(1e-10));
}

TEST_CASE("point masses pay the full gap") {
  auto p = numeric_points({0.0, 1.0}, {0.5, 0.5});
  auto q = numeric_points({0.0}, {1.0});
  CostMatrix c;
  c.rows = 2;
  c.cols = 1;
  c.entries = {0.0, 1.0};
  auto result = wasserstein_exact(p, q, c);
  CHECK(result.distance == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("exact solver matches the LP oracle on random instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    std::size_t m = 1 + rng.below(12);
    std::size_t n = 1 + rng.below(12);
    auto p = random_weights(rng, m);
    auto q = random_weights(rng, n);
    auto cost = random_cost(rng, m, n);
    auto result = transport_exact(p, q, cost);
    double reference = oracles::transport_lp(p, q, cost);
    CHECK(result.distance == doctest::Approx(reference).epsilon(1e-8));
  }
}

TEST_CASE("exact plans satisfy their marginals") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t m = 1 + rng.below(15);
    std::size_t n = 1 + rng.below(15);
    auto p = random_weights(rng, m);
    auto q = random_weights(rng, n);
    auto cost = random_cost(rng, m, n);
    auto result = transport_exact(p, q, cost);
    REQUIRE(result.plan.rows == m);
    REQUIRE(result.plan.cols == n);
    CHECK(result.plan.marginal_violation(p, q) <= 1e-9);
    for (double mass : result.plan.mass) CHECK(mass >= 0.0);
  }
}

TEST_CASE("no random feasible plan beats the exact solution") {
  Rng rng(77);
  for (int trial = 0; trial < 5; ++trial) {
    std::size_t m = 2 + rng.below(8);
    std::size_t n = 2 + rng.below(8);
    auto p = random_weights(rng, m);
    auto q = random_weights(rng, n);
    auto cost = random_cost(rng, m, n);
    auto result = transport_exact(p, q, cost);
    for (int probe = 0; probe < 200; ++probe) {
      auto plan = oracles::random_feasible_plan(p, q, rng);
      CHECK(oracles::plan_cost(plan, cost) >= result.distance - 1e-9);
    }
  }
}

TEST_CASE("transport distance is symmetric under cost transposition") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::size_t m = 1 + rng.below(10);
    std::size_t n = 1 + rng.below(10);
    auto p = random_weights(rng, m);
    auto q = random_weights(rng, n);
    auto cost = random_cost(rng, m, n);
    std::vector<double> t_cost(n * m);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) t_cost[j * m + i] = cost[i * n + j];
    }
    auto forward = transport_exact(p, q, cost);
    auto backward = transport_exact(q, p, t_cost);
    CHECK(forward.distance == doctest::Approx(backward.distance).epsilon(1e-10));
    CHECK(forward.distance >= 0.0);
  }
}

TEST_CASE("transport validates its inputs") {
  std::vector<double> p = {0.5, 0.5};
  std::vector<double> q = {1.0};
  CHECK_THROWS_AS(transport_exact(p, q, std::vector<double>{0.0}), ConfigError);
  CHECK_THROWS_AS(transport_exact({}, q, std::vector<double>{}), ConfigError);
  CHECK_THROWS_AS(transport_exact(std::vector<double>{0.7, 0.4}, q,
                                  std::vector<double>{0.0, 0.0}),
                  ConfigError);
  CHECK_THROWS_AS(transport_exact(std::vector<double>{1.2, -0.2}, q,
                                  std::vector<double>{0.0, 0.0}),
                  ConfigError);
}

TEST_CASE("1-D closed form matches the exact solver") {
  Rng rng(99);
  auto schema = make_schema({num_attr("v", 0.0, 1.0), cat_attr("t", {"x", "y"})},
                            "t", Task::binary_classification);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t m = 1 + rng.below(50);
    std::size_t n = 1 + rng.below(50);
    std::vector<double> pv(m), qv(n);
    for (double& v : pv) v = rng.uniform();
    for (double& v : qv) v = rng.uniform();
    auto p = numeric_points(pv, random_weights(rng, m));
    auto q = numeric_points(qv, random_weights(rng, n));
    double fast = wasserstein_1d(p, q);
    auto c = build_cost_matrix(p, q, *schema);
    auto exact = wasserstein_exact(p, q, c);
    CHECK(fast == doctest::Approx(exact.distance).epsilon(1e-8));
  }
}

TEST_CASE("1-D closed form handles the textbook cases") {
  auto uniform01 = numeric_points({0.0, 1.0}, {0.5, 0.5});
  CHECK(wasserstein_1d(uniform01, uniform01) == doctest::Approx(0.0));
  auto zero = numeric_points({0.0}, {1.0});
  auto one = numeric_points({1.0}, {1.0});
  CHECK(wasserstein_1d(zero, one) == doctest::Approx(1.0));
  CHECK(wasserstein_1d(uniform01, zero) == doctest::Approx(0.5));
}

TEST_CASE("1-D closed form rejects multi-attribute marginals") {
  MarginalDistribution two;
  two.variable.attr_indices = {0, 1};
  two.support = {0.0, 0.0};
  two.weights = {1.0};
  CHECK_THROWS_AS(wasserstein_1d(two, two), ConfigError);
}

TEST_CASE("sinkhorn approaches the exact distance as reg shrinks") {
  std::vector<double> pw = {0.6, 0.4};
  std::vector<double> qw = {0.4, 0.6};
  auto p = numeric_points({0.0, 1.0}, pw);
  auto q = numeric_points({0.0, 1.0}, qw);
  CostMatrix c;
  c.rows = 2;
  c.cols = 2;
  c.entries = {0.0, 1.0, 1.0, 0.0};

  auto coarse = wasserstein_sinkhorn(p, q, c, 0.1);
  auto fine = wasserstein_sinkhorn(p, q, c, 0.01);
  CHECK(fine.converged);
  CHECK(std::fabs(fine.distance - 0.2) <= 0.02 * 0.2);
  CHECK(std::fabs(fine.distance - 0.2) < std::fabs(coarse.distance - 0.2));

  auto self = wasserstein_sinkhorn(p, p, c, 0.005);
  CHECK(self.distance <= 0.02);
}

TEST_CASE("sinkhorn with a huge regularizer yields the independent coupling") {
  Rng rng(31);
  std::size_t m = 6, n = 5;
  auto pw = random_weights(rng, m);
  auto qw = random_weights(rng, n);
  auto cost = random_cost(rng, m, n);
  MarginalDistribution p, q;
  p.variable.attr_indices = {0};
  q.variable.attr_indices = {0};
  p.weights = pw;
  q.weights = qw;
  p.support.assign(m, 0.0);
  q.support.assign(n, 0.0);
  CostMatrix c;
  c.rows = m;
  c.cols = n;
  c.entries = cost;

  double independent = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) independent += pw[i] * qw[j] * cost[i * n + j];
  }
  auto result = wasserstein_sinkhorn(p, q, c, 1e3);
  CHECK(result.distance == doctest::Approx(independent).epsilon(0.01));
}

TEST_CASE("log-domain sinkhorn agrees with the exact solver") {
  // cmax / reg >= 500 forces the log-domain path.
  Rng rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    std::size_t m = 3 + rng.below(20);
    std::size_t n = 3 + rng.below(20);
    std::vector<double> pv(m), qv(n);
    for (double& v : pv) v = rng.uniform(0.0, 0.3);
    for (double& v : qv) v = rng.uniform(0.7, 1.0);
    auto p = numeric_points(pv, random_weights(rng, m));
    auto q = numeric_points(qv, random_weights(rng, n));
    auto schema = make_schema({num_attr("v", 0.0, 1.0), cat_attr("t", {"x", "y"})},
                              "t", Task::binary_classification);
    auto c = build_cost_matrix(p, q, *schema);
    double exact = wasserstein_exact(p, q, c).distance;
    double reg = 1e-3 * c.mean();
    REQUIRE(c.max() / reg >= 500.0);
    auto approx = wasserstein_sinkhorn(p, q, c, reg);
    CHECK(std::fabs(approx.distance - exact) <= 0.02 * exact);
  }
}

TEST_CASE("sinkhorn validates the regularizer") {
  auto p = numeric_points({0.0}, {1.0});
  CostMatrix c;
  c.rows = 1;
  c.cols = 1;
  c.entries = {0.0};
  CHECK_THROWS_AS(wasserstein_sinkhorn(p, p, c, 0.0), ConfigError);
  CHECK_THROWS_AS(wasserstein_sinkhorn(p, p, c, -1.0), ConfigError);
}

TEST_CASE("fidelity of a table against itself is zero") {
  auto real = random_table(mixed_schema(), 300, 17);
  Table copy(real.schema_ptr());
  for (std::size_t r = 0; r < real.rows(); ++r) copy.append_row(real.row_span(r));

  auto marginal_set = enumerate_marginals(real.schema(), 2);
  auto score = fidelity(real, copy, marginal_set);
  CHECK(std::fabs(score.overall) <= 1e-9);
  REQUIRE(score.per_marginal.size() == 6);
  for (const auto& m : score.per_marginal) {
    CHECK(std::fabs(m.distance) <= 1e-9);
    CHECK(m.converged);
  }
}

TEST_CASE("fidelity routes each marginal to the right solver") {
  auto real = random_table(mixed_schema(), 300, 21);
  auto synth = random_table(mixed_schema(), 200, 22);
  auto marginal_set = enumerate_marginals(real.schema(), 2);

  auto score = fidelity(real, synth, marginal_set);
  REQUIRE(score.per_marginal.size() == 6);
  CHECK(score.per_marginal[0].solver == "1d");     // x
  CHECK(score.per_marginal[1].solver == "1d");     // y
  CHECK(score.per_marginal[2].solver == "exact");  // label
  CHECK(score.per_marginal[3].solver == "exact");  // (x, y): 300 points
  CHECK(score.per_marginal[3].support_real == 300);
  CHECK(score.per_marginal[3].support_synth == 200);
  CHECK_FALSE(score.per_marginal[3].subsampled);

  FidelityConfig small_exact;
  small_exact.max_exact_support = 100;
  auto sink = fidelity(real, synth, marginal_set, small_exact);
  CHECK(sink.per_marginal[3].solver == "sinkhorn");
  CHECK(sink.per_marginal[2].solver == "exact");  // 3-label support stays tiny

  FidelityConfig subsampling;
  subsampling.subsample_threshold = 100;
  auto sub = fidelity(real, synth, marginal_set, subsampling);
  CHECK(sub.per_marginal[3].subsampled);
  CHECK(sub.per_marginal[3].support_real == 150);  // ceil(300 / 2)
  CHECK(sub.per_marginal[3].support_synth == 100);
}

TEST_CASE("fidelity is deterministic per config seed") {
  auto real = random_table(mixed_schema(), 250, 3);
  auto synth = random_table(mixed_schema(), 250, 4);
  auto marginal_set = enumerate_marginals(real.schema(), 2);
  FidelityConfig cfg;
  cfg.subsample_threshold = 100;
  cfg.seed = 12;
  auto a = fidelity(real, synth, marginal_set, cfg);
  auto b = fidelity(real, synth, marginal_set, cfg);
  CHECK(a.overall == b.overall);
  for (std::size_t i = 0; i < a.per_marginal.size(); ++i) {
    CHECK(a.per_marginal[i].distance == b.per_marginal[i].distance);
  }

  cfg.seed = 13;
  auto c = fidelity(real, synth, marginal_set, cfg);
  CHECK(a.overall != c.overall);  // different subsample, different estimate
}

TEST_CASE("half baseline beats the histogram baseline on correlated data") {
  auto data = correlated_table(600, 802);
  auto marginal_set = enumerate_marginals(data.schema(), 2);

  auto [d1, d2] = half_baseline(data, 5);
  auto fid_half = fidelity(d1, d2, marginal_set);

  auto histogram = train_histogram(d1, 10, {}, 6);
  auto sampled = histogram->sample(d2.rows(), 7);
  auto fid_hist = fidelity(d1, sampled, marginal_set);

  CHECK(fid_half.overall < fid_hist.overall);

  // The separation comes from the two-way marginals; the histogram matches
  // one-way marginals by construction.
  double half_pairs = 0.0, hist_pairs = 0.0;
  for (std::size_t i = 0; i < marginal_set.variables.size(); ++i) {
    if (marginal_set.variables[i].order() == 2) {
      half_pairs += fid_half.per_marginal[i].distance;
      hist_pairs += fid_hist.per_marginal[i].distance;
    }
  }
  CHECK(half_pairs < hist_pairs);
}

TEST_CASE("fidelity requires matching schemas") {
  auto a = random_table(mixed_schema(), 50, 1);
  auto schema_b = make_schema({num_attr("x", 0.0, 1.0), cat_attr("t", {"x", "y"})},
                              "t", Task::binary_classification);
  auto b = random_table(schema_b, 50, 2);
  auto marginal_set = enumerate_marginals(a.schema(), 1);
  CHECK_THROWS_AS(fidelity(a, b, marginal_set), ConfigError);
}
