#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rgwalk::stats {

double mean(std::span<const double> x);
/// Unbiased sample variance.
double variance(std::span<const double> x);
double stderr_of_mean(std::span<const double> x);

/// Leave-one-out jackknife over blocks. `estimator(skip)` evaluates the
/// statistic with block `skip` removed (skip = -1 for the full sample).
struct JackknifeResult {
  double value = 0.0;
  double stderr_ = 0.0;
};
JackknifeResult jackknife(std::size_t blocks, const std::function<double(long)>& estimator);

struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double slope_stderr = 0.0;
  double intercept_stderr = 0.0;
  double r2 = 0.0;
};
/// Weighted least squares y = a + b x. Empty weights mean unit weights; with
/// unit weights the stderrs use the residual variance, otherwise weights are
/// treated as inverse variances.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w = {});

/// Least squares for y = sum_j c_j f_j(x); returns coefficients and their stderrs.
struct BasisFit {
  std::vector<double> coef;
  std::vector<double> stderr_;
  double residual_rms = 0.0;
};
BasisFit basis_fit(std::span<const double> x, std::span<const double> y,
                   const std::vector<std::function<double(double)>>& basis);

double normal_cdf(double z);
/// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_q(double lambda);
/// Asymptotic p-value of a one-sample KS distance with the Stephens correction.
double ks_p_value(double distance, std::size_t n);
/// One-sample KS distance against a CDF. With lattice_spacing h > 0 the data
/// are multiples of h and `cdf` is evaluated only on lattice points.
double ks_distance(std::vector<double> sorted_or_not, const std::function<double(double)>& cdf,
                   double lattice_spacing = 0.0);
struct TwoSampleKs {
  double distance = 0.0;
  double p_value = 1.0;
};
TwoSampleKs ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Percentile bootstrap interval for the mean.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};
Interval bootstrap_mean_ci(std::span<const double> x, double level, int resamples, std::uint64_t seed);

/// Clopper-Pearson interval for a binomial proportion k / n.
Interval clopper_pearson(int k, int n, double level);

/// Aitken delta-squared extrapolation of the last three terms. Falls back to
/// the last term unless the last two steps share a sign and shrink by a
/// ratio of at most 3/4, which bounds the extrapolated tail by 3 |last step|.
double aitken_limit(std::span<const double> seq);

}  // namespace rgwalk::stats
