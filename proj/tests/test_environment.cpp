#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rgwalk/environment.hpp"
#include "rgwalk/error.hpp"
#include "rgwalk/stats.hpp"

using namespace rgwalk;

namespace {

EnvParams params(EnvModel model, double eps, int extent, int box, std::uint64_t seed) {
  EnvParams p;
  p.model = model;
  p.epsilon = eps;
  p.time_extent = extent;
  p.box_radius = box;
  p.seed = seed;
  return p;
}

const EnvModel kModels[] = {EnvModel::iid, EnvModel::markov_field, EnvModel::cml};

}  // namespace

TEST_CASE("zero disorder is the base kernel") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  for (EnvModel m : kModels) {
    const EnvField env = gen_environment(t, params(m, 0.0, 4, 5, 1));
    CHECK(env.deterministic());
    for (int time = 0; time < 4; ++time)
      for (int u = -5; u <= 5; ++u)
        for (int w = -1; w <= 1; ++w) CHECK(env.p(time, {u, 0}, {w, 0}) == t({w, 0}));
  }
}

TEST_CASE("rows are probability vectors with zero-sum perturbations") {
  for (int dim : {1, 2}) {
    const Kernel t = make_base_kernel(BasePreset::two_step_nn, dim);
    for (EnvModel m : kModels) {
      const EnvField env = gen_environment(t, params(m, 0.4, 6, 4, 7));
      double worst_sum = 0.0, min_p = 1.0;
      for (int time = 0; time < 6; ++time)
        for (std::size_t s = 0; s < env.sites(); ++s) {
          const auto row = env.beta_row(time, s);
          double sum = 0.0;
          for (std::size_t i = 0; i < row.size(); ++i) {
            sum += row[i];
            min_p = std::min(min_p, t.masses()[i] + row[i]);
            // |b| <= eps T(w) since |g - gbar| <= 1
            CHECK(std::abs(row[i]) <= 0.4 * t.masses()[i] + 1e-15);
          }
          worst_sum = std::max(worst_sum, std::abs(sum));
        }
      CHECK(worst_sum < 1e-12);
      CHECK(min_p >= 0.0);
    }
  }
}

TEST_CASE("generation is deterministic, linear in epsilon and antithetic") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  for (EnvModel m : kModels) {
    const EnvField a = gen_environment(t, params(m, 0.1, 8, 6, 42));
    const EnvField b = gen_environment(t, params(m, 0.1, 8, 6, 42));
    const EnvField c = gen_environment(t, params(m, 0.2, 8, 6, 42));
    auto pa = params(m, 0.1, 8, 6, 42);
    pa.antithetic = true;
    const EnvField anti = gen_environment(t, pa);
    const EnvField other = gen_environment(t, params(m, 0.1, 8, 6, 43));
    REQUIRE(a.raw().size() == c.raw().size());
    bool differs = false;
    for (std::size_t i = 0; i < a.raw().size(); ++i) {
      CHECK(a.raw()[i] == b.raw()[i]);
      CHECK(std::abs(c.raw()[i] - 2.0 * a.raw()[i]) < 1e-15);
      CHECK(std::abs(anti.raw()[i] + a.raw()[i]) < 1e-15);
      differs |= a.raw()[i] != other.raw()[i];
    }
    CHECK(differs);
  }
}

TEST_CASE("invalid disorder strength") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  for (double eps : {-0.1, 1.0, 1.5}) {
    try {
      (void)gen_environment(t, params(EnvModel::iid, eps, 2, 2, 1));
      FAIL("expected InvalidDisorder");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidDisorder);
    }
  }
}

TEST_CASE("iid field: distinct times are uncorrelated") {
  // Independence oracle: the covariance of b at distinct times is exactly zero.
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  std::vector<double> x, y;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const EnvField env = gen_environment(t, params(EnvModel::iid, 0.3, 2, 499, r));
    for (std::size_t s = 0; s < env.sites(); ++s) {
      x.push_back(env.beta_row(0, s)[2]);
      y.push_back(env.beta_row(1, s)[2]);
    }
  }
  REQUIRE(x.size() == 99900);
  std::vector<double> prod(x.size());
  const double mx = stats::mean(x), my = stats::mean(y);
  for (std::size_t i = 0; i < x.size(); ++i) prod[i] = (x[i] - mx) * (y[i] - my);
  CHECK(std::abs(stats::mean(prod)) < 4.0 * stats::stderr_of_mean(prod));
  // The single-site mean of b vanishes as well.
  CHECK(std::abs(mx) < 4.0 * stats::stderr_of_mean(x));
}

TEST_CASE("mixing probe") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  const MixingTable iid = env_mixing_probe(gen_environment(t, params(EnvModel::iid, 0.2, 16, 16, 5)), 4, 200);
  REQUIRE(iid.rows.size() == 5);
  CHECK(iid.rows[0].value > 0.0);
  CHECK(std::abs(iid.rows[0].value - iid.direct_variance) <= 2.0 * iid.rows[0].stderr_);
  for (std::size_t s = 1; s < iid.rows.size(); ++s) CHECK(std::abs(iid.rows[s].value) < 4.0 * iid.rows[s].stderr_);
  CHECK_FALSE(iid.fit.has_value());

  const MixingTable mk =
      env_mixing_probe(gen_environment(t, params(EnvModel::markov_field, 0.2, 16, 16, 6)), 5, 400);
  REQUIRE(mk.fit.has_value());
  CHECK(mk.fit->rate > 0.0);
  CHECK(mk.fit->r2 > 0.9);
  CHECK_THROWS_AS(env_mixing_probe(gen_environment(t, params(EnvModel::iid, 0.2, 16, 16, 5)), 2, 50), Error);
}

TEST_CASE("environment file round trip") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 2);
  const EnvField env = gen_environment(t, params(EnvModel::markov_field, 0.2, 3, 3, 9));
  const auto path = (std::filesystem::temp_directory_path() / "rgwalk_env_test.bin").string();
  write_env(env, path);
  const EnvField back = read_env(path);
  std::filesystem::remove(path);
  CHECK(back.base() == env.base());
  CHECK(back.params().seed == env.params().seed);
  REQUIRE(back.raw().size() == env.raw().size());
  for (std::size_t i = 0; i < env.raw().size(); ++i) CHECK(back.raw()[i] == env.raw()[i]);
  CHECK_THROWS_AS(read_env(path), Error);
}
