#pragma once

#include <complex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lattice.hpp"

namespace rgwalk {

inline constexpr double kDefaultTailTolerance = 1e-12;

/// Spatially homogeneous transition kernel stored as cell masses on the window
/// |u|_inf <= radius. Cells at `level` have side scale_base^-level in rescaled
/// units; all physical rescaling is carried as metadata.
class Kernel {
 public:
  Kernel() = default;
  /// Masses are indexed by window_index(dim, radius, offset). Small negative
  /// round-off (> -1e-13) is clamped to zero; anything below throws InvalidKernel.
  Kernel(int dim, int radius, std::vector<double> masses, int level = 0, int scale_base = 2);

  static Kernel delta(int dim, int level = 0, int scale_base = 2);

  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] int radius() const noexcept { return radius_; }
  [[nodiscard]] int level() const noexcept { return level_; }
  [[nodiscard]] int scale_base() const noexcept { return scale_base_; }
  /// Number of cells per unit length, scale_base^level.
  [[nodiscard]] double scale() const noexcept;

  [[nodiscard]] double operator()(Offset o) const noexcept {
    return in_window(dim_, radius_, o) ? masses_[window_index(dim_, radius_, o)] : 0.0;
  }
  [[nodiscard]] std::span<const double> masses() const noexcept { return masses_; }
  [[nodiscard]] std::size_t size() const noexcept { return masses_.size(); }
  [[nodiscard]] Offset offset(std::size_t i) const noexcept { return window_offset(dim_, radius_, i); }

  [[nodiscard]] double total_mass() const noexcept;
  /// Largest |T(u) - T(g u)| over the hypercubic group.
  [[nodiscard]] double asymmetry() const noexcept;
  /// Density value at the cell centred at `o`: mass times cells per unit volume.
  [[nodiscard]] double density(Offset o) const noexcept;

  [[nodiscard]] Kernel with_level(int level, int scale_base) const;

  friend bool operator==(const Kernel&, const Kernel&) = default;

 private:
  int dim_ = 1;
  int radius_ = 0;
  int level_ = 0;
  int scale_base_ = 2;
  std::vector<double> masses_{1.0};
};

/// Throws InvalidKernel unless the kernel is normalized to `tol` and symmetric.
void validate_kernel(const Kernel& k, double tol = 1e-12);

/// Shrinks the window to the smallest radius whose outside mass is below
/// tail_tol, then renormalizes. Throws WindowOverflow if the mass outside
/// max_radius exceeds tail_tol.
Kernel truncate(const Kernel& k, double tail_tol = kDefaultTailTolerance, int max_radius = 1 << 20);

/// Averages over the hypercubic group.
Kernel symmetrize(const Kernel& k);

enum class BasePreset { two_step_nn, lazy_nn, custom };

struct PresetParams {
  double hold = 0.5;                                  // lazy_nn holding probability
  std::vector<std::pair<Offset, double>> custom;      // custom table
  int check_grid = 64;                                // Fourier grid for the |T^(k)| < 1 check
};

/// two_step_nn in d dimensions is the product of 1-d kernels {1/4, 1/2, 1/4}.
/// Throws RejectsKernel if |T^(k)| reaches 1 away from k = 0.
Kernel make_base_kernel(BasePreset preset, int dim, const PresetParams& params = {});
BasePreset parse_preset(const std::string& name);
std::string preset_name(BasePreset preset);

struct ConvolveOptions {
  double tail_tol = kDefaultTailTolerance;
  int max_radius = 1 << 20;
};

Kernel convolve(const Kernel& a, const Kernel& b, const ConvolveOptions& opts = {});
/// power-fold self convolution by repeated squaring; T^0 = delta.
Kernel convolution_power(const Kernel& k, long power, const ConvolveOptions& opts = {});

/// Sum_u T(u) |u|^2 in squared cells.
double second_moment(const Kernel& k);
/// second_moment converted to rescaled units: cells^2 / scale^2.
double physical_second_moment(const Kernel& k);

/// T^(kappa) = Sum_u T(u) exp(-i kappa.u) with kappa in cell units.
std::complex<double> fourier(const Kernel& k, std::array<double, 2> kappa);
/// Real part of T^ at physical wave number k along the first axis.
double fourier_axis(const Kernel& k, double physical_k);

/// Samples of T^ on the grid kappa_m = 2 pi m / grid (cell units); the
/// physical wave number is scale * kappa_m.
struct SpectralKernel {
  int dim = 1;
  int grid = 0;
  int level = 0;
  int scale_base = 2;
  int window_radius = 0;  // radius of the real-space kernel the samples represent
  std::vector<std::complex<double>> samples;  // index m0 + grid * m1, m in [0, grid)

  /// Folded index m in [-grid/2, grid/2).
  [[nodiscard]] int folded(int m) const noexcept { return m < grid / 2 ? m : m - grid; }
  [[nodiscard]] double scale() const noexcept;
  [[nodiscard]] double physical_k(int m) const noexcept;
  [[nodiscard]] std::complex<double> at(int m0, int m1 = 0) const noexcept {
    return samples[static_cast<std::size_t>(m0) + (dim == 1 ? 0 : static_cast<std::size_t>(grid) * m1)];
  }
};

/// Default grid: 256 per axis in d = 1, 128 in d = 2.
int default_grid(int dim);

SpectralKernel to_spectral(const Kernel& k, int grid);
/// Inverse transform. Throws GridTooCoarse if the window does not fit the grid
/// or the result is not a real nonnegative kernel to 1e-8.
Kernel from_spectral(const SpectralKernel& s, double tail_tol = kDefaultTailTolerance);

/// JSON: {dim, level, scale_base, window_radius, entries: [[[offset...], "mass"], ...]}.
std::string kernel_to_json(const Kernel& k);
Kernel kernel_from_json(const std::string& text);

}  // namespace rgwalk
