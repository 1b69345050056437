#pragma once

#include <span>
#include <string>
#include <vector>

#include "rg_engine.hpp"
#include "walker.hpp"

namespace rgwalk {

struct FddTest {
  std::string name;   // ks, cf_k1..cf_k3, moment2, moment4, ks_increment
  double t0 = 0.0;    // increment start (0 for marginals)
  double t1 = 0.0;
  int coordinate = 0;
  double statistic = 0.0;
  double p_value = 1.0;
  bool pass = true;
};

struct IncrementCorrelation {
  double t0 = 0.0, t1 = 0.0, t2 = 0.0;  // increments [t0, t1] and [t1, t2]
  int coordinate = 0;
  double r = 0.0;
  double bound = 0.0;  // 4 / sqrt(count)
  bool pass = true;
};

struct FddReport {
  std::vector<double> times;
  int level = 0;
  double D = 0.0;
  double alpha = 0.01;
  double alpha_per_test = 0.01;  // Bonferroni
  std::size_t count = 0;
  std::vector<FddTest> tests;
  std::vector<IncrementCorrelation> correlations;
  bool pass = true;
};

struct FddOptions {
  bool increments = true;  // KS of consecutive increments
  std::vector<int> cf_wavenumbers{1, 2, 3};
  int min_count = 10000;
};

/// Tests omega(t_i) and consecutive increments against the centred Gaussian
/// with variance t D / d per coordinate: KS on the lattice T^(-1/2) Z with the
/// discretized reference CDF, empirical characteristic function at each
/// wavenumber (chi^2 with 2 degrees of freedom), and z-tests of the second and
/// fourth moments. Every test uses alpha / (number of tests). Disjoint
/// increments must have sample correlation within 4 / sqrt(count).
FddReport fdd_compare(const RescaledPaths& paths, double D, std::span<const double> times, double alpha,
                      const FddOptions& opts = {});

/// Single-sample building blocks, exposed for calibration.
double ks_gaussian_p(std::vector<double> x, double variance, double lattice_spacing);
double cf_gaussian_p(std::span<const double> x, double variance, double k);
double moment_gaussian_p(std::span<const double> x, double variance, int order);

struct ConvergenceRow {
  int level = 0;
  double D = 0.0;
  double increment = 0.0;      // D_{n+1} - D_n
  double sup_err = 0.0;        // sup_x e^|x| |T_n(x) - T*_{D_n}(x)|, densities
  double delta = 0.0;
  double ratio = 0.0;          // sup_err / delta (or / L^(-n/2) for eps = 0)
  double fixpoint_err = 0.0;   // Fourier-side distance from the flow diagnostics
  double ks_distance = -1.0;   // max KS statistic of a matching fdd report, -1 if none
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  double D0 = 0.0;
  double D_limit = 0.0;
  double epsilon = 0.0;
  double shift_over_eps2 = 0.0;   // |D_limit - D0| / eps^2, 0 when eps = 0
  double max_ratio = 0.0;          // bounded-ratio constant
  bool cauchy = true;              // |D_{n+1} - D_n| non-increasing from level 1 on
};

/// Needs at least 3 levels. With epsilon = 0 the e^-lambda factor of delta_n
/// is dropped (flows without disorder carry no lambda).
ConvergenceReport convergence_report(const FlowResult& flow, double epsilon, std::span<const FddReport> fdd = {});

}  // namespace rgwalk
