#include <doctest.h>

#include <cmath>
#include <random>

#include "rgwalk/scaling.hpp"

using namespace rgwalk;

namespace {

const std::vector<double> kTimes{0.25, 0.5, 1.0};

std::vector<double> gaussian_sample(std::size_t n, double var, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(var));
  std::vector<double> x(n);
  for (double& v : x) v = g(gen);
  return x;
}

}  // namespace

TEST_CASE("single-sample tests hold their level under the reference law") {
  // Each test is a 1% level test, so count rejections over many samples instead of trusting one.
  const int reps = 300;
  int rejections[6] = {};
  for (int r = 0; r < reps; ++r) {
    const auto x = gaussian_sample(4000, 0.5, 1000 + static_cast<std::uint64_t>(r));
    const double p[6] = {ks_gaussian_p(x, 0.5, 0.0),      cf_gaussian_p(x, 0.5, 1.0),
                         cf_gaussian_p(x, 0.5, 2.0),      cf_gaussian_p(x, 0.5, 3.0),
                         moment_gaussian_p(x, 0.5, 2), moment_gaussian_p(x, 0.5, 4)};
    for (int i = 0; i < 6; ++i) rejections[i] += p[i] < 0.01;
  }
  for (int k : rejections) {
    const stats::Interval ci = stats::clopper_pearson(k, reps, 0.999);
    CHECK(ci.lo <= 0.01);
    CHECK(ci.hi >= 0.01);
  }
}

TEST_CASE("single-sample tests reject a wrong variance") {
  const auto x = gaussian_sample(20000, 0.6, 2);
  CHECK(ks_gaussian_p(x, 0.5, 0.0) < 1e-4);
  CHECK(cf_gaussian_p(x, 0.5, 1.0) < 1e-4);
  CHECK(moment_gaussian_p(x, 0.5, 2) < 1e-4);
}

TEST_CASE("fourth moment sees heavy tails that keep the variance") {
  // Laplace law with variance 0.5 has kurtosis 6 instead of 3.
  std::mt19937_64 gen(3);
  std::exponential_distribution<double> e(2.0);
  std::vector<double> x(50000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2 ? 1 : -1) * e(gen);
  CHECK(moment_gaussian_p(x, 0.5, 4) < 1e-6);
}

TEST_CASE("fdd report on the discretized Wiener measure") {
  for (int dim : {1, 2}) {
    const WalkEnsemble w = synthetic_wiener(dim, 4096, 20000, 0.5, 10 + static_cast<std::uint64_t>(dim));
    const FddReport rep = fdd_compare(rescale_paths(w), 0.5, kTimes, 0.01);
    CHECK(rep.pass);
    CHECK(rep.alpha_per_test == doctest::Approx(0.01 / static_cast<double>(rep.tests.size())));
    CHECK(rep.correlations.size() == static_cast<std::size_t>(2 * dim));
    for (const auto& c : rep.correlations) CHECK(c.bound == doctest::Approx(4.0 / std::sqrt(20000.0)));

    const FddReport wrong = fdd_compare(rescale_paths(w), 0.6, kTimes, 0.01);
    CHECK_FALSE(wrong.pass);
  }
}

TEST_CASE("correlated increments are caught") {
  // omega_{3T/4} repeats the step made during [T/4, T/2]: second-half increments are correlated.
  WalkEnsemble w = synthetic_wiener(1, 4096, 20000, 0.5, 5);
  const std::size_t cps = w.checkpoints.size();
  REQUIRE(w.checkpoints == std::vector<int>{0, 1024, 2048, 3072, 4096});
  for (std::size_t i = 0; i < w.count(); ++i) {
    Offset* p = &w.positions[i * cps];
    p[3] = p[2] + (p[2] - p[1]);
  }
  const FddReport rep = fdd_compare(rescale_paths(w), 0.5, std::vector<double>{0.25, 0.5, 0.75}, 0.01);
  bool any_corr_fail = false;
  for (const auto& c : rep.correlations) any_corr_fail |= !c.pass;
  CHECK(any_corr_fail);
  CHECK_FALSE(rep.pass);
}

TEST_CASE("fdd preconditions") {
  const WalkEnsemble w = synthetic_wiener(1, 64, 500, 0.5, 6);
  CHECK_THROWS_AS(fdd_compare(rescale_paths(w), 0.5, kTimes, 0.01), std::invalid_argument);
  FddOptions o;
  o.min_count = 100;
  CHECK_THROWS_AS(fdd_compare(rescale_paths(w), 0.5, std::vector<double>{0.5, 0.25}, 0.01, o), std::invalid_argument);
  CHECK_NOTHROW(fdd_compare(rescale_paths(w), 0.5, kTimes, 0.01, o));
}

TEST_CASE("convergence report without disorder") {
  FlowConfig fc;
  fc.base = make_base_kernel(BasePreset::two_step_nn, 1);
  fc.levels = 4;
  fc.replicas = 2;
  fc.sources = 2;
  const FlowResult flow = run_flow(fc);
  const ConvergenceReport rep = convergence_report(flow, 0.0);
  CHECK(rep.D0 == doctest::Approx(0.5));
  CHECK(rep.shift_over_eps2 == 0.0);
  CHECK(rep.cauchy);
  REQUIRE(rep.rows.size() == 5);
  // The sup error decays at least like L^(-n/2), so the ratio stays bounded.
  for (std::size_t n = 1; n < rep.rows.size(); ++n) {
    CHECK(rep.rows[n].sup_err < rep.rows[n - 1].sup_err);
    CHECK(rep.rows[n].ratio <= rep.rows[n - 1].ratio * 1.0001);
  }

  fc.levels = 1;
  CHECK_THROWS_AS(convergence_report(run_flow(fc), 0.0), std::invalid_argument);
}
