#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rgwalk/error.hpp"
#include "rgwalk/kernel_field.hpp"
#include "rgwalk/rg_engine.hpp"
#include "rgwalk/stats.hpp"

using namespace rgwalk;

namespace {

EnvField make_env(int dim, double eps, int extent, int box, std::uint64_t seed, EnvModel model = EnvModel::iid) {
  EnvParams p;
  p.model = model;
  p.epsilon = eps;
  p.time_extent = extent;
  p.box_radius = box;
  p.seed = seed;
  return gen_environment(make_base_kernel(BasePreset::two_step_nn, dim), p);
}

double row_entry(const KernelField& f, int t, std::size_t s, Offset w) {
  return in_window(f.dim, f.row_radius, w) ? f.row(t, s)[window_index(f.dim, f.row_radius, w)] : 0.0;
}

double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (stats::normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

TEST_CASE("renormalization without disorder is the convolution power") {
  for (int dim : {1, 2}) {
    const EnvField env = make_env(dim, 0.0, 16, 12, 1);
    const KernelField q = renormalize_field(transition_field(env), 2);
    CHECK(q.level == 1);
    CHECK(q.time_extent == 4);
    const Kernel t4 = convolution_power(env.base(), 4, {0.0});
    for (int t = 0; t < q.time_extent; ++t)
      for (std::size_t s = 0; s < q.sources.size(); s += 5)
        for (std::size_t i = 0; i < t4.size(); ++i) CHECK(std::abs(row_entry(q, t, s, t4.offset(i)) - t4.masses()[i]) < 1e-15);
  }
}

TEST_CASE("point mass stays pinned") {
  EnvParams p;
  p.time_extent = 4;
  p.box_radius = 3;
  const EnvField env = gen_environment(Kernel::delta(1), p);
  const KernelField q = renormalize_field(transition_field(env), 2);
  for (std::size_t s = 0; s < q.sources.size(); ++s) CHECK(row_entry(q, 0, s, {0, 0}) == 1.0);
}

TEST_CASE("renormalized rows are probability vectors") {
  const EnvField env = make_env(2, 0.5, 16, 17, 3, EnvModel::markov_field);
  const KernelField q = renormalize_field(transition_field(env), 4);
  for (int t = 0; t < q.time_extent; ++t)
    for (std::size_t s = 0; s < q.sources.size(); ++s) {
      double sum = 0.0;
      for (double v : q.row(t, s)) {
        CHECK(v >= 0.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("renormalization preconditions") {
  const KernelField p0 = transition_field(make_env(1, 0.1, 12, 20, 4));
  CHECK(code_of([&] { renormalize_field(p0, 4); }) == ErrorCode::DivisibilityError);
  CHECK_THROWS_AS(renormalize_field(p0, 3), std::invalid_argument);
  const KernelField small = transition_field(make_env(1, 0.1, 16, 3, 4));
  CHECK(code_of([&] { renormalize_field(small, 2); }) == ErrorCode::BoundaryContamination);
}

TEST_CASE("decomposition") {
  std::vector<KernelField> reps;
  for (std::uint64_t r = 0; r < 8; ++r) reps.push_back(renormalize_field(transition_field(make_env(1, 0.3, 4, 8, r)), 2));
  const Decomposition d = decompose(reps);
  CHECK(d.mean.asymmetry() < 1e-15);
  CHECK(std::abs(d.mean.total_mass() - 1.0) < 1e-12);
  REQUIRE(d.residuals.size() == reps.size());
  for (const auto& b : d.residuals)
    for (int t = 0; t < b.time_extent; ++t)
      for (std::size_t s = 0; s < b.sources.size(); ++s) {
        double sum = 0.0;
        for (double v : b.row(t, s)) sum += v;
        CHECK(std::abs(sum) < 1e-10);
      }
  CHECK(code_of([&] { decompose(std::span(reps).first(1)); }) == ErrorCode::InsufficientReplicas);

  std::vector<KernelField> clean;
  for (std::uint64_t r = 0; r < 2; ++r) clean.push_back(renormalize_field(transition_field(make_env(1, 0.0, 4, 8, r)), 2));
  const Decomposition z = decompose(clean);
  for (const auto& b : z.residuals)
    for (double v : b.rows) CHECK(std::abs(v) < 1e-15);
}

TEST_CASE("Fourier RG step") {
  const SpectralKernel d = fourier_rg_step(to_spectral(Kernel::delta(1), 64), 2);
  for (const auto& z : d.samples) CHECK(std::abs(z - 1.0) < 1e-14);

  // Closed form for cos^2(k/2): T^_1(k) = cos^8(k/4) in physical wave numbers.
  const SpectralKernel s1 = fourier_rg_step(to_spectral(make_base_kernel(BasePreset::two_step_nn, 1), 256), 2);
  CHECK(s1.level == 1);
  for (int m = 0; m < s1.grid; m += 3) {
    const double k = s1.physical_k(m);
    CHECK(std::abs(s1.at(m) - std::pow(std::cos(k / 4), 8)) < 1e-12);
  }

  // The Gaussian is invariant.
  const double D = 0.5;
  SpectralKernel g = to_spectral(Kernel::delta(1), 128);
  for (int m = 0; m < g.grid; ++m) g.samples[static_cast<std::size_t>(m)] = std::exp(-D * std::pow(g.physical_k(m), 2) / 2);
  const SpectralKernel g1 = fourier_rg_step(g, 2);
  for (int m = 0; m < g1.grid; ++m) CHECK(std::abs(g1.at(m) - std::exp(-D * std::pow(g1.physical_k(m), 2) / 2)) < 1e-14);
}

TEST_CASE("Gaussian target") {
  for (double D : {4.0, 9.0, 25.0}) {
    const GaussianTarget g = gaussian_target(D, 1);
    CHECK(std::abs(second_moment(g.kernel) - D) / D < 0.01);
    CHECK(std::abs(g.spectral.at(0) - 1.0) < 1e-15);
  }
  const GaussianTarget g2 = gaussian_target(0.5, 2, 3);
  CHECK(std::abs(physical_second_moment(g2.kernel) - 0.5) < 0.005);
  CHECK(gaussian_density(1.0, 1, {0, 0}) == doctest::Approx(1.0 / std::sqrt(2 * M_PI)));
}

TEST_CASE("linearized RG") {
  const Kernel T = make_base_kernel(BasePreset::two_step_nn, 1);
  const EnvField zero = make_env(1, 0.0, 8, 10, 1);
  for (double v : linearized_rg(perturbation_field(zero), T, 2).rows) CHECK(v == 0.0);

  // Finite-difference oracle: R(T + h b) - T' - L(h b) = O(h^2), and L is linear.
  const Kernel T4 = convolution_power(T, 4, {0.0});
  double prev = 0.0;
  for (double h : {0.02, 0.01}) {
    const EnvField env = make_env(1, h, 8, 10, 77);
    const KernelField q = renormalize_field(transition_field(env), 2);
    const KernelField lb = linearized_rg(perturbation_field(env), T, 2);
    double worst = 0.0, lin = 0.0;
    for (int t = 0; t < q.time_extent; ++t)
      for (std::size_t s = 0; s < q.sources.size(); ++s)
        for (int w = -q.row_radius; w <= q.row_radius; ++w) {
          const double l = row_entry(lb, t, s, {w, 0});
          worst = std::max(worst, std::abs(row_entry(q, t, s, {w, 0}) - T4({w, 0}) - l));
          lin = std::max(lin, std::abs(l));
        }
    CHECK(worst < 0.05 * lin);
    if (prev > 0.0) CHECK(worst / prev == doctest::Approx(0.25).epsilon(0.02));
    prev = worst;
  }
}

TEST_CASE("zeta extraction") {
  std::vector<double> k, b2, b4;
  for (int i = 1; i <= 64; ++i) {
    const double x = 0.5 * i / 64;
    k.push_back(x);
    b2.push_back(0.01 * x * x);
    b4.push_back(0.01 * x * x + 0.001 * std::pow(x, 4));
  }
  CHECK(std::abs(fit_zeta(k, b2).zeta - 0.01) < 1e-8);
  CHECK(std::abs(fit_zeta(k, b4).zeta - 0.01) < 1e-4);

  std::vector<double> noise;
  for (std::size_t i = 0; i < k.size(); ++i) noise.push_back((i % 2 ? 1e-6 : -1e-6) + 1e-9 * k[i] * k[i]);
  CHECK(code_of([&] { fit_zeta(k, noise); }) == ErrorCode::FitUnstable);

  const Kernel T = make_base_kernel(BasePreset::two_step_nn, 1);
  const Kernel T1 = convolution_power(T, 4, {0.0}).with_level(1, 2);
  const Kernel T2 = convolution_power(T, 16, {0.0}).with_level(2, 2);
  CHECK(std::abs(extract_zeta(T1, T2, 2).zeta) < 1e-12);
  CHECK(code_of([&] { extract_zeta(T, T2, 2); }) == ErrorCode::InvalidKernel);
}

TEST_CASE("rho and delta updates") {
  const Kernel T = make_base_kernel(BasePreset::two_step_nn, 1);
  const RGState s = initial_state(T, 2, 1.0);
  CHECK(s.D0 == doctest::Approx(0.5));
  CHECK(rho_update(s, 0.0).rho == s.rho);
  CHECK(std::pow(rho_update(s, 0.005).rho, 2) == doctest::Approx(0.98).epsilon(1e-14));
  CHECK(rho_update(s, 0.005).D == doctest::Approx(0.49).epsilon(1e-14));
  CHECK(code_of([&] { rho_update(s, 0.25); }) == ErrorCode::FlowDiverged);
  CHECK(delta_n(3, 4, 2.0) == doctest::Approx(0.016917).epsilon(1e-4));
  CHECK(delta_n(0, 2, 0.0) == 1.0);
}

TEST_CASE("flow without disorder") {
  FlowConfig fc;
  fc.base = make_base_kernel(BasePreset::two_step_nn, 1);
  fc.levels = 5;
  fc.replicas = 2;
  fc.sources = 2;
  const FlowResult f = run_flow(fc);
  REQUIRE(f.levels.size() == 6);
  for (const auto& l : f.levels) {
    CHECK(std::abs(l.D - 0.5) < 1e-9);
    CHECK(std::abs(l.D_moment - 0.5) < 1e-9);
    CHECK(l.identity_err < 1e-9);
  }
  for (std::size_t n = 2; n < f.levels.size(); ++n) {
    CHECK(f.levels[n].fixpoint_err < f.levels[n - 1].fixpoint_err);
    CHECK(f.levels[n].fixpoint_err / f.levels[n - 1].fixpoint_err == doctest::Approx(0.25).epsilon(0.2));
  }
  CHECK(std::abs(f.D_limit - 0.5) < 1e-9);
}

TEST_CASE("flow with symmetric disorder") {
  FlowConfig fc;
  fc.base = make_base_kernel(BasePreset::two_step_nn, 1);
  fc.env.epsilon = 0.2;
  fc.env.seed = 5;
  fc.levels = 3;
  fc.replicas = 64;
  fc.sources = 16;
  const FlowResult f = run_flow(fc);
  for (const auto& l : f.levels) {
    // symmetry_z is a max over the 4^n mirror pairs w, -w of the level; 3 sigma is family-wise.
    const double pairs = std::pow(4.0, l.level);
    CHECK(l.symmetry_z < normal_quantile(1.0 - 0.0027 / (2.0 * pairs)));
    CHECK(l.identity_err < 1e-9);
  }
  // Same seed reproduces the flow exactly.
  const FlowResult g = run_flow(fc);
  CHECK(g.D_limit == f.D_limit);
  fc.replicas = 3;
  CHECK_THROWS_AS(run_flow(fc), std::invalid_argument);
}
