#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rgwalk/parallel.hpp"
#include "rgwalk/rg_engine.hpp"
#include "rgwalk/walker.hpp"

using namespace rgwalk;

namespace {

EnvField env_for(const Kernel& base, double eps, int T, int box, std::uint64_t seed = 1) {
  EnvParams p;
  p.epsilon = eps;
  p.time_extent = T;
  p.box_radius = box;
  p.seed = seed;
  return gen_environment(base, p);
}

std::vector<double> endpoints(const WalkEnsemble& w) {
  return rescale_paths(w).marginal(1.0, 0);
}

}  // namespace

TEST_CASE("pinned walker") {
  EnvParams p;
  p.time_extent = 16;
  p.box_radius = 4;
  const WalkEnsemble w = sample_walks(gen_environment(Kernel::delta(1), p), 16, 50, 3);
  for (const Offset& x : w.positions) CHECK(x == Offset{0, 0});
}

TEST_CASE("paths start at the origin and only take allowed steps") {
  for (int dim : {1, 2}) {
    const Kernel base = make_base_kernel(BasePreset::two_step_nn, dim);
    const EnvField env = env_for(base, 0.9, 64, 70, 8);
    WalkOptions o;
    o.full_paths = true;
    const WalkEnsemble w = sample_walks(env, 64, 500, 9, o);
    REQUIRE(w.checkpoints.size() == 65);
    for (std::size_t i = 0; i < w.count(); ++i) {
      CHECK(w.at(i, 0) == Offset{0, 0});
      for (int t = 0; t < 64; ++t) {
        const Offset x = w.at(i, static_cast<std::size_t>(t));
        const Offset step = w.at(i, static_cast<std::size_t>(t) + 1) - x;
        CHECK(env.p(t, x, step) > 0.0);
      }
    }
  }
}

TEST_CASE("determinism and independence from the worker count") {
  const EnvField env = env_for(make_base_kernel(BasePreset::two_step_nn, 1), 0.3, 256, 260);
  set_worker_count(1);
  const WalkEnsemble a = sample_walks(env, 256, 3000, 5);
  set_worker_count(3);
  const WalkEnsemble b = sample_walks(env, 256, 3000, 5);
  set_worker_count(0);
  CHECK(a.positions == b.positions);
  const WalkEnsemble c = sample_walks(env, 256, 3000, 6);
  CHECK(a.positions != c.positions);
  // Different seeds give the same law: two half-ensembles are indistinguishable.
  CHECK(stats::ks_two_sample(endpoints(a), endpoints(c)).p_value > 0.01);
}

TEST_CASE("free walk: zero mean and variance D0") {
  const Kernel base = make_base_kernel(BasePreset::two_step_nn, 1);
  const int T = 10000;
  const EnvField env = env_for(base, 0.0, T, T + 2);
  const WalkEnsemble small = sample_walks(env, T, 10000, 11);
  std::vector<double> xT;
  for (std::size_t i = 0; i < small.count(); ++i) xT.push_back(small.at(i, small.checkpoints.size() - 1)[0]);
  CHECK(std::abs(stats::mean(xT)) < 4 * std::sqrt(0.5 * T / 10000.0));

  const WalkEnsemble big = sample_walks(env, T, 100000, 12);
  const DiffusionEstimate d = estimate_diffusion(big, 200);
  CHECK(std::abs(d.D - 0.5) < 0.01);
  CHECK(d.ci.lo <= 0.5);
  CHECK(d.ci.hi >= 0.5);
  CHECK(big.level == -1);
}

TEST_CASE("boundary contamination") {
  const EnvField env = env_for(make_base_kernel(BasePreset::two_step_nn, 1), 0.1, 400, 12);
  CHECK(code_of([&] { sample_walks(env, 400, 200, 1); }) == ErrorCode::BoundaryContamination);
}

TEST_CASE("path rescaling") {
  WalkEnsemble w;
  w.dim = 1;
  w.horizon = 4;
  w.checkpoints = {0, 1, 2, 3, 4};
  w.positions = {{0, 0}, {1, 0}, {2, 0}, {1, 0}, {0, 0}};
  const RescaledPaths r = rescale_paths(w);
  CHECK(r.at(0, 0.5, 0) == doctest::Approx(1.0));
  CHECK(r.at(0, 0.375, 0) == doctest::Approx(0.75));
  CHECK(r.at(0, 1.0, 0) == 0.0);
  CHECK(r.at(0, 0.0, 0) == 0.0);

  WalkEnsemble zero = w;
  for (auto& x : zero.positions) x = {0, 0};
  for (double t : {0.0, 0.1, 0.6, 1.0}) CHECK(rescale_paths(zero).at(0, t, 0) == 0.0);

  // Endpoint is T^(-1/2) omega_T for every path.
  const WalkEnsemble s = synthetic_wiener(2, 1024, 200, 1.0, 4);
  const RescaledPaths rs = rescale_paths(s);
  for (std::size_t i = 0; i < s.count(); ++i)
    for (int k = 0; k < 2; ++k) CHECK(rs.at(i, 1.0, k) == s.at(i, s.checkpoints.size() - 1)[static_cast<std::size_t>(k)] / 32.0);
}

TEST_CASE("diffusion estimates") {
  for (double D : {4.0, 16.0}) {
    const GaussianTarget g = gaussian_target(D, 1);
    CHECK(std::abs(estimate_diffusion(g.kernel).D - D) / D < 0.01);
  }
  const Kernel t16 = convolution_power(make_base_kernel(BasePreset::two_step_nn, 2), 16, {0.0}).with_level(2, 2);
  CHECK(estimate_diffusion(t16).D == doctest::Approx(1.0).epsilon(1e-12));

  const WalkEnsemble few = synthetic_wiener(1, 64, 99, 0.5, 1);
  CHECK(code_of([&] { estimate_diffusion(few); }) == ErrorCode::InsufficientReplicas);

  const WalkEnsemble syn = synthetic_wiener(1, 4096, 50000, 0.5, 2);
  const DiffusionEstimate d = estimate_diffusion(syn, 200);
  CHECK(std::abs(d.D - 0.5) < 4 * d.stderr_);
}

TEST_CASE("weak disorder moves D by at most order eps^2") {
  const Kernel base = make_base_kernel(BasePreset::two_step_nn, 1);
  const int T = 1024;
  const WalkEnsemble w = sample_walks(env_for(base, 0.1, T, T + 4, 21), T, 40000, 22);
  const DiffusionEstimate d = estimate_diffusion(w, 200);
  CHECK(std::abs(d.D - 0.5) <= 4 * d.stderr_ + 0.1 * 0.1);
  CHECK(w.level == 5);
}
