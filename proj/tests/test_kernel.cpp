#include <doctest.h>

#include <cmath>

#include "rgwalk/error.hpp"
#include "rgwalk/kernel.hpp"
#include "rgwalk/rng.hpp"

using namespace rgwalk;

namespace {

Kernel random_symmetric(int dim, int radius, std::uint64_t seed) {
  Xoshiro256 rng(seed);
  std::vector<double> m(window_size(dim, radius));
  double total = 0.0;
  for (auto& v : m) total += v = 0.1 + rng.uniform();
  for (auto& v : m) v /= total;
  return symmetrize(Kernel(dim, radius, m));
}

// Independent oracle: direct double loop over both windows.
std::vector<double> naive_convolve_1d(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

}  // namespace

TEST_CASE("base kernel presets") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  CHECK(t({-1, 0}) == doctest::Approx(0.25));
  CHECK(t({0, 0}) == doctest::Approx(0.5));
  CHECK(t({1, 0}) == doctest::Approx(0.25));
  for (double k : {0.0, 0.3, 1.7, 3.0}) CHECK(std::abs(fourier(t, {k, 0}).real() - std::pow(std::cos(k / 2), 2)) < 1e-14);

  PresetParams half;
  half.hold = 0.5;
  const Kernel lazy = make_base_kernel(BasePreset::lazy_nn, 1, half);
  CHECK(lazy == t);
  CHECK(std::abs(fourier(lazy, {0, 0}) - 1.0) < 1e-15);

  PresetParams one_step;
  one_step.custom = {{{-1, 0}, 0.5}, {{1, 0}, 0.5}};
  CHECK_THROWS_AS(make_base_kernel(BasePreset::custom, 1, one_step), Error);
  try {
    make_base_kernel(BasePreset::custom, 1, one_step);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RejectsKernel);
  }

  PresetParams lopsided;
  lopsided.custom = {{{0, 0}, 0.5}, {{1, 0}, 0.5}};
  CHECK_THROWS_AS(make_base_kernel(BasePreset::custom, 1, lopsided), Error);
}

TEST_CASE("convolution") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  const Kernel tt = convolve(t, t);
  const double expect[] = {1.0 / 16, 0.25, 0.375, 0.25, 1.0 / 16};
  for (int u = -2; u <= 2; ++u) CHECK(tt({u, 0}) == doctest::Approx(expect[u + 2]).epsilon(1e-14));

  CHECK(convolve(Kernel::delta(1), t) == t);

  const Kernel a = random_symmetric(1, 3, 11), b = random_symmetric(1, 2, 12);
  const Kernel ab = convolve(a, b, {0.0}), ba = convolve(b, a, {0.0});
  std::vector<double> va(a.masses().begin(), a.masses().end()), vb(b.masses().begin(), b.masses().end());
  const auto naive = naive_convolve_1d(va, vb);
  for (int u = -5; u <= 5; ++u) {
    CHECK(std::abs(ab({u, 0}) - ba({u, 0})) < 1e-12);
    CHECK(std::abs(ab({u, 0}) - naive[static_cast<std::size_t>(u + 5)]) < 1e-14);
  }

  const Kernel c2 = random_symmetric(2, 1, 13);
  const Kernel p5 = convolution_power(c2, 5, {0.0});
  Kernel direct = c2;
  for (int i = 1; i < 5; ++i) direct = convolve(direct, c2, {0.0});
  for (std::size_t i = 0; i < p5.size(); ++i) CHECK(std::abs(p5.masses()[i] - direct(p5.offset(i))) < 1e-14);
  CHECK(std::abs(p5.total_mass() - 1.0) < 1e-13);
}

TEST_CASE("second moments") {
  CHECK(second_moment(make_base_kernel(BasePreset::two_step_nn, 1)) == doctest::Approx(0.5));
  CHECK(second_moment(Kernel::delta(1)) == 0.0);
  CHECK(second_moment(make_base_kernel(BasePreset::two_step_nn, 2)) == doctest::Approx(1.0));
  // n-fold power has moment n D0 in cells; at level k with power 4^k it is D0 in rescaled units.
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  const Kernel t16 = convolution_power(t, 16, {0.0}).with_level(2, 2);
  CHECK(second_moment(t16) == doctest::Approx(8.0));
  CHECK(physical_second_moment(t16) == doctest::Approx(0.5));
}

TEST_CASE("Fourier transforms") {
  const Kernel t = make_base_kernel(BasePreset::two_step_nn, 1);
  const SpectralKernel s = to_spectral(t, 64);
  for (int m = 0; m < 64; ++m) {
    const double k = 2 * M_PI * s.folded(m) / 64.0;
    CHECK(std::abs(s.at(m) - std::pow(std::cos(k / 2), 2)) < 1e-12);
  }
  const SpectralKernel d = to_spectral(Kernel::delta(2), 16);
  for (const auto& z : d.samples) CHECK(std::abs(z - 1.0) < 1e-14);

  for (int dim : {1, 2}) {
    const Kernel k = random_symmetric(dim, 2, 20 + static_cast<std::uint64_t>(dim));
    const Kernel back = from_spectral(to_spectral(k, default_grid(dim)), 0.0);
    double err = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) err = std::max(err, std::abs(back(k.offset(i)) - k.masses()[i]));
    CHECK(err < 1e-10);
  }
}

TEST_CASE("truncate and json round trip") {
  const Kernel t = convolution_power(make_base_kernel(BasePreset::two_step_nn, 1), 64, {0.0});
  const Kernel cut = truncate(t, 1e-10);
  CHECK(cut.radius() < t.radius());
  CHECK(std::abs(cut.total_mass() - 1.0) < 1e-14);
  CHECK_THROWS_AS(truncate(t, 1e-10, 2), Error);

  const Kernel k = random_symmetric(2, 2, 31).with_level(3, 2);
  CHECK(kernel_from_json(kernel_to_json(k)) == k);
}

TEST_CASE("kernel properties on random inputs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int dim = 1 + static_cast<int>(seed % 2);
    const Kernel k = random_symmetric(dim, 1 + static_cast<int>(seed % 3), seed);
    CHECK(k.asymmetry() < 1e-15);
    CHECK(std::abs(k.total_mass() - 1.0) < 1e-12);
    // |T^| <= 1 and T^ real for symmetric kernels
    for (double x : {0.1, 1.0, 2.5})
      CHECK(std::abs(fourier(k, {x, dim == 2 ? x / 2 : 0.0}).imag()) < 1e-14);
  }
}
