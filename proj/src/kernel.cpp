#include "rgwalk/kernel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numbers>

#include <json.hpp>

#include "rgwalk/error.hpp"

namespace rgwalk {

namespace {

// FFTW planning is not thread safe.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

void check_compatible(const Kernel& a, const Kernel& b) {
  if (a.dim() != b.dim() || a.level() != b.level() || a.scale_base() != b.scale_base())
    throw Error(ErrorCode::InvalidKernel, "convolve: kernels differ in dim, level or scale_base");
}

std::vector<std::complex<double>> run_fft(std::vector<std::complex<double>> data, int dim, int grid,
                                          int sign) {
  std::vector<std::complex<double>> out(data.size());
  auto* in_ptr = reinterpret_cast<fftw_complex*>(data.data());
  auto* out_ptr = reinterpret_cast<fftw_complex*>(out.data());
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_mutex());
    plan = dim == 1 ? fftw_plan_dft_1d(grid, in_ptr, out_ptr, sign, FFTW_ESTIMATE)
                    // row-major with index m0 + grid * m1: the fastest axis is m0
                    : fftw_plan_dft_2d(grid, grid, in_ptr, out_ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(fftw_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::size_t grid_index(int dim, int grid, Offset o) {
  auto pos = [grid](int x) { return static_cast<std::size_t>(((x % grid) + grid) % grid); };
  return dim == 1 ? pos(o[0]) : pos(o[0]) + static_cast<std::size_t>(grid) * pos(o[1]);
}

}  // namespace

Kernel::Kernel(int dim, int radius, std::vector<double> masses, int level, int scale_base)
    : dim_(dim), radius_(radius), level_(level), scale_base_(scale_base), masses_(std::move(masses)) {
  check_dim(dim);
  if (radius < 0) throw Error(ErrorCode::InvalidKernel, "negative window radius");
  if (scale_base < 2) throw Error(ErrorCode::InvalidKernel, "scale_base must be >= 2");
  if (masses_.size() != window_size(dim, radius))
    throw Error(ErrorCode::InvalidKernel, "mass table does not match the window size");
  for (double& m : masses_) {
    if (!std::isfinite(m)) throw Error(ErrorCode::InvalidKernel, "non-finite kernel mass");
    if (m < 0.0) {
      if (m < -1e-13) throw Error(ErrorCode::InvalidKernel, "negative kernel mass");
      m = 0.0;
    }
  }
}

Kernel Kernel::delta(int dim, int level, int scale_base) {
  return Kernel(dim, 0, {1.0}, level, scale_base);
}

double Kernel::scale() const noexcept { return std::pow(static_cast<double>(scale_base_), level_); }

double Kernel::total_mass() const noexcept {
  double s = 0.0;
  for (double m : masses_) s += m;
  return s;
}

double Kernel::asymmetry() const noexcept {
  double worst = 0.0;
  std::array<Offset, 8> images{};
  for (std::size_t i = 0; i < masses_.size(); ++i) {
    const int n = hypercubic_images(dim_, offset(i), images);
    for (int g = 0; g < n; ++g) worst = std::max(worst, std::abs(masses_[i] - (*this)(images[g])));
  }
  return worst;
}

double Kernel::density(Offset o) const noexcept { return (*this)(o) * std::pow(scale(), dim_); }

Kernel Kernel::with_level(int level, int scale_base) const {
  return Kernel(dim_, radius_, masses_, level, scale_base);
}

void validate_kernel(const Kernel& k, double tol) {
  if (std::abs(k.total_mass() - 1.0) > tol)
    throw Error(ErrorCode::InvalidKernel, "kernel mass differs from 1");
  if (k.asymmetry() > tol) throw Error(ErrorCode::InvalidKernel, "kernel is not hypercubic symmetric");
}

Kernel truncate(const Kernel& k, double tail_tol, int max_radius) {
  const int dim = k.dim();
  const int radius = k.radius();
  std::vector<double> shell(static_cast<std::size_t>(radius) + 1, 0.0);
  for (std::size_t i = 0; i < k.size(); ++i) shell[norm_inf(k.offset(i))] += k.masses()[i];

  // outside[r] = mass with |u|_inf > r
  std::vector<double> outside(shell.size(), 0.0);
  for (int r = radius - 1; r >= 0; --r) outside[r] = outside[r + 1] + shell[r + 1];

  const int cap = std::min(radius, max_radius);
  if (outside[cap] > tail_tol)
    throw Error(ErrorCode::WindowOverflow, "kernel mass outside radius " + std::to_string(cap) +
                                               " exceeds the tail tolerance");
  int r = cap;
  while (r > 0 && outside[r - 1] <= tail_tol) --r;
  if (r == radius) return k;

  std::vector<double> masses(window_size(dim, r));
  double kept = 0.0;
  for (std::size_t i = 0; i < masses.size(); ++i) {
    masses[i] = k(window_offset(dim, r, i));
    kept += masses[i];
  }
  if (outside[r] > 0.0 && kept > 0.0) {
    const double target = kept + outside[r];
    for (double& m : masses) m *= target / kept;
  }
  return Kernel(dim, r, std::move(masses), k.level(), k.scale_base());
}

Kernel symmetrize(const Kernel& k) {
  std::vector<double> masses(k.size());
  std::array<Offset, 8> images{};
  for (std::size_t i = 0; i < k.size(); ++i) {
    const int n = hypercubic_images(k.dim(), k.offset(i), images);
    double s = 0.0;
    for (int g = 0; g < n; ++g) s += k(images[g]);
    masses[i] = s / n;
  }
  return Kernel(k.dim(), k.radius(), std::move(masses), k.level(), k.scale_base());
}

BasePreset parse_preset(const std::string& name) {
  if (name == "two_step_nn") return BasePreset::two_step_nn;
  if (name == "lazy_nn") return BasePreset::lazy_nn;
  if (name == "custom") return BasePreset::custom;
  throw Error(ErrorCode::SchemaError, "unknown kernel preset '" + name + "'");
}

std::string preset_name(BasePreset preset) {
  switch (preset) {
    case BasePreset::two_step_nn: return "two_step_nn";
    case BasePreset::lazy_nn: return "lazy_nn";
    case BasePreset::custom: return "custom";
  }
  return "custom";
}

Kernel make_base_kernel(BasePreset preset, int dim, const PresetParams& params) {
  check_dim(dim);
  Kernel kernel;
  switch (preset) {
    case BasePreset::two_step_nn: {
      const double m1[3] = {0.25, 0.5, 0.25};
      std::vector<double> masses(window_size(dim, 1));
      for (std::size_t i = 0; i < masses.size(); ++i) {
        const Offset o = window_offset(dim, 1, i);
        masses[i] = dim == 1 ? m1[o[0] + 1] : m1[o[0] + 1] * m1[o[1] + 1];
      }
      kernel = Kernel(dim, 1, std::move(masses));
      break;
    }
    case BasePreset::lazy_nn: {
      if (!(params.hold >= 0.0 && params.hold <= 1.0))
        throw Error(ErrorCode::InvalidKernel, "lazy_nn hold must lie in [0, 1]");
      std::vector<double> masses(window_size(dim, 1), 0.0);
      const double step = (1.0 - params.hold) / (2.0 * dim);
      masses[window_index(dim, 1, {0, 0})] = params.hold;
      masses[window_index(dim, 1, {1, 0})] = step;
      masses[window_index(dim, 1, {-1, 0})] = step;
      if (dim == 2) {
        masses[window_index(dim, 1, {0, 1})] = step;
        masses[window_index(dim, 1, {0, -1})] = step;
      }
      kernel = Kernel(dim, 1, std::move(masses));
      break;
    }
    case BasePreset::custom: {
      if (params.custom.empty()) throw Error(ErrorCode::InvalidKernel, "custom kernel table is empty");
      int radius = 0;
      double total = 0.0;
      for (const auto& [o, m] : params.custom) {
        if (dim == 1 && o[1] != 0) throw Error(ErrorCode::InvalidKernel, "2-d offset in a 1-d table");
        if (!(m >= 0.0) || !std::isfinite(m)) throw Error(ErrorCode::InvalidKernel, "negative custom mass");
        radius = std::max(radius, norm_inf(o));
        total += m;
      }
      if (!(total > 0.0)) throw Error(ErrorCode::InvalidKernel, "custom kernel has zero mass");
      std::vector<double> masses(window_size(dim, radius), 0.0);
      for (const auto& [o, m] : params.custom) masses[window_index(dim, radius, o)] += m / total;
      kernel = Kernel(dim, radius, std::move(masses));
      if (kernel.asymmetry() > 1e-12)
        throw Error(ErrorCode::InvalidKernel, "custom kernel is not hypercubic symmetric");
      break;
    }
  }

  // |T^(k)| < 1 away from the origin; the grid must contain k = pi.
  const int grid = std::max(params.check_grid + params.check_grid % 2, 4 * kernel.radius() + 2);
  const SpectralKernel s = to_spectral(kernel, grid);
  for (int m1 = 0; m1 < (dim == 1 ? 1 : grid); ++m1)
    for (int m0 = 0; m0 < grid; ++m0) {
      if (m0 == 0 && m1 == 0) continue;
      if (std::abs(s.at(m0, m1)) >= 1.0 - 1e-10)
        throw Error(ErrorCode::RejectsKernel,
                    "|T^(k)| = 1 at k != 0: the kernel is periodic or degenerate");
    }
  return kernel;
}

Kernel convolve(const Kernel& a, const Kernel& b, const ConvolveOptions& opts) {
  check_compatible(a, b);
  const int dim = a.dim();
  const int radius = a.radius() + b.radius();
  std::vector<double> out(window_size(dim, radius), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double ma = a.masses()[i];
    if (ma == 0.0) continue;
    const Offset oa = a.offset(i);
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double mb = b.masses()[j];
      if (mb == 0.0) continue;
      out[window_index(dim, radius, oa + b.offset(j))] += ma * mb;
    }
  }
  return truncate(Kernel(dim, radius, std::move(out), a.level(), a.scale_base()), opts.tail_tol,
                  opts.max_radius);
}

Kernel convolution_power(const Kernel& k, long power, const ConvolveOptions& opts) {
  if (power < 0) throw std::invalid_argument("negative convolution power");
  Kernel result = Kernel::delta(k.dim(), k.level(), k.scale_base());
  Kernel base = k;
  while (power > 0) {
    if (power & 1) result = convolve(result, base, opts);
    power >>= 1;
    if (power > 0) base = convolve(base, base, opts);
  }
  return result;
}

double second_moment(const Kernel& k) {
  double s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) s += k.masses()[i] * static_cast<double>(norm2(k.offset(i)));
  return s;
}

double physical_second_moment(const Kernel& k) {
  const double scale = k.scale();
  return second_moment(k) / (scale * scale);
}

std::complex<double> fourier(const Kernel& k, std::array<double, 2> kappa) {
  std::complex<double> s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    const Offset o = k.offset(i);
    const double phase = kappa[0] * o[0] + (k.dim() == 2 ? kappa[1] * o[1] : 0.0);
    s += k.masses()[i] * std::polar(1.0, -phase);
  }
  return s;
}

double fourier_axis(const Kernel& k, double physical_k) {
  const double kappa = physical_k / k.scale();
  // Accumulate per first coordinate, then a cosine sum.
  std::vector<double> marginal(static_cast<std::size_t>(2 * k.radius() + 1), 0.0);
  for (std::size_t i = 0; i < k.size(); ++i) marginal[k.offset(i)[0] + k.radius()] += k.masses()[i];
  double s = 0.0;
  for (int x = -k.radius(); x <= k.radius(); ++x) s += marginal[x + k.radius()] * std::cos(kappa * x);
  return s;
}

int default_grid(int dim) { return dim == 1 ? 256 : 128; }

double SpectralKernel::scale() const noexcept {
  return std::pow(static_cast<double>(scale_base), level);
}

double SpectralKernel::physical_k(int m) const noexcept {
  return scale() * 2.0 * std::numbers::pi * folded(m) / grid;
}

SpectralKernel to_spectral(const Kernel& k, int grid) {
  if (grid < 4 * k.radius() || grid < 2)
    throw Error(ErrorCode::GridTooCoarse, "grid " + std::to_string(grid) + " is below 4 * window_radius");
  const int dim = k.dim();
  const std::size_t total = dim == 1 ? grid : static_cast<std::size_t>(grid) * grid;
  std::vector<std::complex<double>> data(total, 0.0);
  for (std::size_t i = 0; i < k.size(); ++i) data[grid_index(dim, grid, k.offset(i))] += k.masses()[i];

  SpectralKernel s;
  s.dim = dim;
  s.grid = grid;
  s.level = k.level();
  s.scale_base = k.scale_base();
  s.window_radius = k.radius();
  s.samples = run_fft(std::move(data), dim, grid, FFTW_FORWARD);
  return s;
}

Kernel from_spectral(const SpectralKernel& s, double tail_tol) {
  const int dim = s.dim;
  const int radius = s.window_radius;
  if (2 * radius + 1 > s.grid)
    throw Error(ErrorCode::GridTooCoarse, "window does not fit on the spectral grid");
  const auto values = run_fft(s.samples, dim, s.grid, FFTW_BACKWARD);
  const double norm = dim == 1 ? s.grid : static_cast<double>(s.grid) * s.grid;

  std::vector<double> masses(window_size(dim, radius));
  std::vector<char> used(values.size(), 0);
  for (std::size_t i = 0; i < masses.size(); ++i) {
    const std::size_t g = grid_index(dim, s.grid, window_offset(dim, radius, i));
    const std::complex<double> v = values[g] / norm;
    used[g] = 1;
    if (std::abs(v.imag()) > 1e-8 || v.real() < -1e-8)
      throw Error(ErrorCode::GridTooCoarse, "inverse transform is not a real nonnegative kernel");
    masses[i] = std::max(v.real(), 0.0);
  }
  for (std::size_t g = 0; g < values.size(); ++g)
    if (!used[g] && std::abs(values[g] / norm) > 1e-8)
      throw Error(ErrorCode::GridTooCoarse, "aliased mass outside the kernel window");
  return truncate(Kernel(dim, radius, std::move(masses), s.level, s.scale_base), tail_tol);
}

std::string kernel_to_json(const Kernel& k) {
  nlohmann::json j;
  j["dim"] = k.dim();
  j["level"] = k.level();
  j["scale_base"] = k.scale_base();
  j["window_radius"] = k.radius();
  auto entries = nlohmann::json::array();
  char buf[40];
  for (std::size_t i = 0; i < k.size(); ++i) {
    const Offset o = k.offset(i);
    auto off = k.dim() == 1 ? nlohmann::json::array({o[0]}) : nlohmann::json::array({o[0], o[1]});
    std::snprintf(buf, sizeof buf, "%.17g", k.masses()[i]);
    entries.push_back(nlohmann::json::array({off, std::string(buf)}));
  }
  j["entries"] = std::move(entries);
  return j.dump();
}

Kernel kernel_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const int dim = j.at("dim").get<int>();
    const int radius = j.at("window_radius").get<int>();
    check_dim(dim);
    std::vector<double> masses(window_size(dim, radius), 0.0);
    for (const auto& e : j.at("entries")) {
      const auto& off = e.at(0);
      if (static_cast<int>(off.size()) != dim) throw Error(ErrorCode::IoError, "offset arity mismatch");
      Offset o{off.at(0).get<int>(), dim == 2 ? off.at(1).get<int>() : 0};
      if (!in_window(dim, radius, o)) throw Error(ErrorCode::IoError, "kernel entry outside window");
      masses[window_index(dim, radius, o)] = std::stod(e.at(1).get<std::string>());
    }
    return Kernel(dim, radius, std::move(masses), j.at("level").get<int>(), j.at("scale_base").get<int>());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoError, std::string("malformed kernel JSON: ") + ex.what());
  }
}

}  // namespace rgwalk
