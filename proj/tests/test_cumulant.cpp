#include <doctest.h>

#include <bit>
#include <cmath>
#include <random>

#include "helpers.hpp"
#include "rgwalk/cumulant.hpp"
#include "rgwalk/rng.hpp"

using namespace rgwalk;

namespace {

EnvField prototype(EnvModel model, double eps, std::uint64_t seed = 3) {
  EnvParams p;
  p.model = model;
  p.epsilon = eps;
  p.time_extent = 8;
  p.box_radius = 8;
  p.seed = seed;
  return gen_environment(make_base_kernel(BasePreset::two_step_nn, 1), p);
}

Factor factor(int group, int t, int u, int v) { return {group, t, {u, 0}, {v, 0}}; }

}  // namespace

TEST_CASE("set partitions") {
  const std::size_t bell[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140};
  for (int m = 0; m <= 8; ++m) CHECK(partitions(m).size() == bell[m]);
  CHECK(code_of([] { partitions(9); }) == ErrorCode::TooLarge);
  // Every partition covers the set exactly once.
  for (const Partition& pi : partitions(5)) {
    std::uint32_t seen = 0;
    for (std::uint32_t b : pi) {
      CHECK((seen & b) == 0u);
      seen |= b;
    }
    CHECK(seen == 31u);
  }
  CHECK(partitions_of_mask(0b10110).size() == 5);
}

TEST_CASE("connected correlations of small sets") {
  // Mean-zero singletons and the two-set lattice.
  const auto moment1 = [](std::uint32_t) { return 0.0; };
  CHECK(connected_correlation(1, moment1) == 0.0);
  const auto moment2 = [](std::uint32_t mask) { return mask == 3 ? 0.7 : 0.0; };
  CHECK(connected_correlation(2, moment2) == doctest::Approx(0.7));
  const auto shifted = [](std::uint32_t mask) { return mask == 3 ? 0.7 + 0.2 * 0.5 : (mask == 1 ? 0.2 : 0.5); };
  CHECK(connected_correlation(2, shifted) == doctest::Approx(0.7));
}

TEST_CASE("moment cumulant round trip and independence") {
  Xoshiro256 rng(4);
  for (int m = 1; m <= 6; ++m) {
    std::vector<double> mom(std::size_t{1} << m);
    for (auto& v : mom) v = rng.uniform() - 0.5;
    mom[0] = 1.0;
    const auto back = moments_from_cumulants(m, cumulants_from_moments(m, mom));
    for (std::size_t i = 1; i < mom.size(); ++i) CHECK(std::abs(back[i] - mom[i]) < 1e-12);
  }
  // Independent blocks {0,1} and {2,3}: moments factorize, so any set straddling both has zero cumulant.
  std::vector<double> ma(4), mb(4);
  for (auto& v : ma) v = rng.uniform();
  for (auto& v : mb) v = rng.uniform();
  ma[0] = mb[0] = 1.0;
  std::vector<double> mom(16);
  for (std::uint32_t mask = 0; mask < 16; ++mask) mom[mask] = ma[mask & 3u] * mb[mask >> 2];
  const auto cum = cumulants_from_moments(4, mom);
  for (std::uint32_t mask = 1; mask < 16; ++mask)
    if ((mask & 3u) && (mask >> 2)) CHECK(std::abs(cum[mask]) < 1e-14);
}

TEST_CASE("index families and tau") {
  IndexFamily single{1, {factor(0, 0, 0, 0)}};
  CHECK(tau_weight(single) == 0.0);
  IndexFamily jump{1, {factor(0, 0, 0, 3)}};
  CHECK(tau_weight(jump) == doctest::Approx(6.0));
  IndexFamily shared{1, {factor(0, 0, 2, 2), factor(1, 5, 2, 2)}};
  CHECK(tau_weight(shared) == 0.0);
  IndexFamily moving{1, {factor(0, 0, 1, 2), factor(1, 5, 1, 2)}};
  CHECK(tau_weight(moving) == doctest::Approx(1 + 1 + 1));
  CHECK(tau_weight(jump, 2.0) == doctest::Approx(3.0));
  CHECK(moving.groups() == 2);
  CHECK(moving.diameter() == 5);

  IndexFamily repeated{1, {factor(0, 1, 0, 1), factor(0, 1, 0, 1)}};
  CHECK_THROWS_AS(repeated.validate(), std::invalid_argument);
  IndexFamily five_groups{1, {}};
  for (int g = 0; g < 5; ++g) five_groups.factors.push_back(factor(g, g, 0, 1));
  CHECK_THROWS_AS(five_groups.validate(), std::invalid_argument);
  CHECK_NOTHROW(moving.validate());
}

TEST_CASE("sample cumulants") {
  // Gaussian samples with known covariance: second cumulant = covariance, third vanishes.
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n01;
  const int N = 200000, blocks = 20;
  std::vector<double> data;
  std::vector<int> block_of;
  for (int i = 0; i < N; ++i) {
    const double a = n01(gen), b = n01(gen);
    data.push_back(1.0 + a);
    data.push_back(-2.0 + 0.6 * a + 0.8 * b);
    data.push_back(a + b);
    block_of.push_back(i * blocks / N);
  }
  const auto c2 = sample_cumulant(std::span(data).first(2 * static_cast<std::size_t>(N)), 2, block_of, blocks);
  (void)c2;
  std::vector<double> pairs;
  for (int i = 0; i < N; ++i) {
    pairs.push_back(data[3 * static_cast<std::size_t>(i)]);
    pairs.push_back(data[3 * static_cast<std::size_t>(i) + 1]);
  }
  const CumulantValue cov = sample_cumulant(pairs, 2, block_of, blocks);
  CHECK(std::abs(cov.value - 0.6) < 4 * cov.stderr_);
  CHECK(cov.stderr_ < 0.01);
  const CumulantValue third = sample_cumulant(data, 3, block_of, blocks);
  CHECK(std::abs(third.value) < 4 * third.stderr_);

  // Shift invariance for order >= 2.
  std::vector<double> moved = pairs;
  for (double& v : moved) v += 5.0;
  CHECK(sample_cumulant(moved, 2, block_of, blocks).value == doctest::Approx(cov.value).epsilon(1e-9));
}

TEST_CASE("decay scan without disorder is exactly zero") {
  DecayScanConfig cfg;
  cfg.orders = {2, 3};
  cfg.max_sep = 2;
  cfg.replicas = 100;
  const DecayScan s = decay_scan(prototype(EnvModel::iid, 0.0), cfg);
  for (const auto& r : s.rows) {
    CHECK(r.estimate.value.value == 0.0);
    CHECK_FALSE(r.resolved);
  }
}

TEST_CASE("decay scan on iid disorder") {
  DecayScanConfig cfg;
  cfg.orders = {2};
  cfg.max_sep = 3;
  cfg.replicas = 400;
  const DecayScan s = decay_scan(prototype(EnvModel::iid, 0.2), cfg);
  REQUIRE(s.rows.size() == 4);
  CHECK(s.rows[0].resolved);
  CHECK(s.rows[0].estimate.value.value > 0.0);
  for (std::size_t i = 1; i < s.rows.size(); ++i)
    CHECK(std::abs(s.rows[i].estimate.value.value) < 4 * s.rows[i].estimate.value.stderr_);
  CHECK(s.fits.at(2).super_exponential);
  CHECK(std::isinf(s.fits.at(2).rate));
  CHECK(s.integrated_norm > 0.0);
}

TEST_CASE("decay scan on correlated disorder decays at a finite rate") {
  DecayScanConfig cfg;
  cfg.orders = {2};
  cfg.max_sep = 3;
  cfg.replicas = 600;
  const DecayScan s = decay_scan(prototype(EnvModel::markov_field, 0.2), cfg);
  const DecayFit& f = s.fits.at(2);
  CHECK_FALSE(f.super_exponential);
  CHECK(f.rate > 0.0);
  CHECK(std::isfinite(f.rate));
  CHECK(s.rows[0].estimate.weighted > s.rows[2].estimate.weighted);
}

TEST_CASE("decay scan needs enough replicas") {
  DecayScanConfig cfg;
  cfg.orders = {2};
  cfg.max_sep = 1;
  cfg.replicas = 99;
  CHECK(code_of([&] { decay_scan(prototype(EnvModel::iid, 0.2), cfg); }) == ErrorCode::InsufficientReplicas);
}
