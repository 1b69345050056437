#pragma once

#include <optional>
#include <span>
#include <vector>

#include "environment.hpp"
#include "kernel.hpp"
#include "kernel_field.hpp"

namespace rgwalk {

struct RenormalizeOptions {
  std::vector<Offset> sources;  // empty: every site of the box
};

/// Renormalized transition field R_l q: row (t, u) is the l^2-step transition
/// from cell u over times [l^2 t, l^2 (t + 1)), computed by exact sequential
/// composition of the rows of `field`. l must be a power of the field's
/// scale_base. Throws DivisibilityError if l^2 does not divide the time extent
/// and BoundaryContamination if l^2 * row_radius exceeds the box radius.
KernelField renormalize_field(const KernelField& field, int l, const RenormalizeOptions& opts = {});

struct Decomposition {
  Kernel mean;       // T_n, projected onto hypercubic symmetry
  Kernel raw_mean;   // replica and (t, u) average before projection
  std::vector<KernelField> residuals;  // b_n = q - T_n, one per replica
  double symmetry_z = 0.0;  // max over offsets and group elements of |<T(w) - T(g w)>| / stderr
};

/// Splits renormalized fields into mean kernel and residual rows. Needs >= 2 replicas.
Decomposition decompose(std::span<const KernelField> replicas, bool keep_residuals = true);

/// One Fourier step: samples of T^_n(k / L)^(L^2) on the torus of the next
/// level. Samples are indexed so that the physical wave number of index m is
/// scale * 2 pi m / grid, which makes the step a pointwise power.
SpectralKernel fourier_rg_step(const SpectralKernel& s, int L);

/// Heat kernel (2 pi D / d)^(-d/2) exp(-d x^2 / (2 D)).
double gaussian_density(double D, int dim, std::array<double, 2> x);

struct GaussianTarget {
  Kernel kernel;           // cell-discretized density at the requested level, renormalized
  SpectralKernel spectral;  // exp(-D k^2 / (2 d)) at the physical wave numbers of the grid
};
GaussianTarget gaussian_target(double D, int dim, int level = 0, int scale_base = 2, int grid = 0);

/// First-order image of perturbation rows under R_L around the deterministic
/// kernel T (same level as b):
///   (Lb)(t', u', .) = sum_{n < L^2} delta_{u'} T^n b_{L^2 t' + n} T^(L^2 - n - 1).
KernelField linearized_rg(const KernelField& b, const Kernel& T, int L);

struct ZetaOptions {
  double k_max = 0.5;
  int samples = 64;
};

struct ZetaFit {
  double zeta = 0.0;
  double quartic = 0.0;
  double zeta_stderr = 0.0;
  double residual_rms = 0.0;
};

/// Least-squares fit of beta^(k) on the basis {k^2, k^4}. Throws FitUnstable
/// when the 2-sigma interval of zeta covers both 0 and +-2|zeta|.
ZetaFit fit_zeta(std::span<const double> k, std::span<const double> beta_hat);

/// zeta from beta^(k) = T^_{n+1}(k) - T^_n(k / L)^(L^2) on (0, k_max].
ZetaFit extract_zeta(const Kernel& Tn, const Kernel& Tn1, int L, const ZetaOptions& opts = {});

/// delta_n = L^(-n/2) e^(-lambda).
double delta_n(int n, int L, double lambda);

struct RGState {
  int level = 0;
  Kernel mean_kernel;
  double rho = 1.0;
  double D0 = 0.0;
  double D = 0.0;  // rho^2 D0
  double delta = 0.0;
  int scale_base = 2;
  double lambda = 1.0;
};

RGState initial_state(const Kernel& base, int L, double lambda);

/// rho'^2 = rho^2 - 2 d zeta / D0. Keeps mean_kernel; the caller installs the
/// next level's kernel. Throws FlowDiverged if rho'^2 <= 0.
RGState rho_update(const RGState& state, double zeta);

struct FlowConfig {
  Kernel base;
  EnvParams env;        // time_extent and box_radius are sized by run_flow
  int L = 2;
  int levels = 5;
  int replicas = 64;    // environment realizations (antithetic partners count individually)
  int sources = 16;     // source cells per replica
  int blocks = 1;       // independent top-level time blocks per replica
  bool antithetic = true;
  int max_jackknife_blocks = 32;
  ZetaOptions zeta;
};

struct LevelDiagnostics {
  int level = 0;
  double D = 0.0;          // rho^2 D0
  double D_moment = 0.0;   // second moment of T_n in rescaled units
  double rho = 1.0;
  double delta = 0.0;
  double D_stderr = 0.0;   // jackknife over replica blocks (antithetic pairs kept together)
  double zeta = 0.0;       // zeta extracted between this level and the next
  double zeta_stderr = 0.0;      // jackknife
  double zeta_fit_stderr = 0.0;  // least-squares stderr of the k^2 coefficient
  double increment = 0.0;        // D_{n+1} - D_n
  double increment_stderr = 0.0;
  double b_sup = 0.0;      // max |b_n| over sampled rows, density units
  double fixpoint_err = 0.0;  // sup_{|k|<=1} |T^_n(k) - exp(-D_n k^2 / 2d)|
  double identity_err = 0.0;  // |D(L^2n)(p) - D(1)(p_n)| on a sampled source
  double symmetry_z = 0.0;
};

struct FlowResult {
  std::vector<RGState> states;
  std::vector<LevelDiagnostics> levels;
  double D_limit = 0.0;  // Aitken extrapolation of D_n
  double D_limit_stderr = 0.0;
  int jackknife_blocks = 0;
};

/// renormalize -> decompose -> extract_zeta -> rho_update for n = 0..levels.
/// Level n rows are R_{L^n} p, sampled at `sources` cells per replica.
FlowResult run_flow(const FlowConfig& cfg);

/// D(l^2)(p) = l^-2 sum_y P_[0,l^2](0, y) |y|^2 from direct propagation in the environment.
double diffusion_at_time(const EnvField& env, Offset source, int steps);
/// D(1)(q) for a renormalized row: sum_y q(y) |y|^2 with y at cell centres in rescaled units.
double diffusion_of_row(std::span<const double> row, int dim, int row_radius, double scale);

}  // namespace rgwalk
