#include "rgwalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "rgwalk/rng.hpp"

namespace rgwalk::stats {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

double stderr_of_mean(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

JackknifeResult jackknife(std::size_t blocks, const std::function<double(long)>& estimator) {
  JackknifeResult r;
  r.value = estimator(-1);
  if (blocks < 2) return r;
  std::vector<double> loo(blocks);
  for (std::size_t b = 0; b < blocks; ++b) loo[b] = estimator(static_cast<long>(b));
  const double m = mean(loo);
  double s = 0.0;
  for (double v : loo) s += (v - m) * (v - m);
  r.stderr_ = std::sqrt(s * static_cast<double>(blocks - 1) / static_cast<double>(blocks));
  return r;
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n || (!w.empty() && w.size() != n))
    throw std::invalid_argument("linear_fit needs at least two matching points");
  const bool weighted = !w.empty();
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = weighted ? w[i] : 1.0;
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double xm = sx / sw, ym = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = weighted ? w[i] : 1.0;
    sxx += wi * (x[i] - xm) * (x[i] - xm);
    sxy += wi * (x[i] - xm) * (y[i] - ym);
    syy += wi * (y[i] - ym) * (y[i] - ym);
  }
  LinearFit f;
  if (sxx <= 0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  f.slope = sxy / sxx;
  f.intercept = ym - f.slope * xm;
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = weighted ? w[i] : 1.0;
    const double e = y[i] - f.intercept - f.slope * x[i];
    rss += wi * e * e;
  }
  f.r2 = syy > 0 ? 1.0 - rss / syy : 1.0;
  const double sigma2 = weighted ? 1.0 : (n > 2 ? rss / static_cast<double>(n - 2) : 0.0);
  f.slope_stderr = std::sqrt(sigma2 / sxx);
  f.intercept_stderr = std::sqrt(sigma2 * (1.0 / sw + xm * xm / sxx));
  return f;
}

BasisFit basis_fit(std::span<const double> x, std::span<const double> y,
                   const std::vector<std::function<double(double)>>& basis) {
  const std::size_t n = x.size(), p = basis.size();
  if (n < p || y.size() != n) throw std::invalid_argument("basis_fit: too few points");
  // Normal equations, solved by Gauss-Jordan; p is tiny.
  std::vector<double> a(p * p, 0.0), b(p, 0.0), fx(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) fx[j] = basis[j](x[i]);
    for (std::size_t j = 0; j < p; ++j) {
      b[j] += fx[j] * y[i];
      for (std::size_t k = 0; k < p; ++k) a[j * p + k] += fx[j] * fx[k];
    }
  }
  std::vector<double> inv(p * p, 0.0);
  for (std::size_t j = 0; j < p; ++j) inv[j * p + j] = 1.0;
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(a[r * p + c]) > std::abs(a[piv * p + c])) piv = r;
    if (a[piv * p + c] == 0.0) throw std::invalid_argument("basis_fit: singular design");
    for (std::size_t k = 0; k < p; ++k) {
      std::swap(a[c * p + k], a[piv * p + k]);
      std::swap(inv[c * p + k], inv[piv * p + k]);
    }
    const double d = a[c * p + c];
    for (std::size_t k = 0; k < p; ++k) {
      a[c * p + k] /= d;
      inv[c * p + k] /= d;
    }
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = a[r * p + c];
      for (std::size_t k = 0; k < p; ++k) {
        a[r * p + k] -= f * a[c * p + k];
        inv[r * p + k] -= f * inv[c * p + k];
      }
    }
  }
  BasisFit fit;
  fit.coef.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t k = 0; k < p; ++k) fit.coef[j] += inv[j * p + k] * b[k];
  double rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double f = 0;
    for (std::size_t j = 0; j < p; ++j) f += fit.coef[j] * basis[j](x[i]);
    rss += (y[i] - f) * (y[i] - f);
  }
  fit.residual_rms = std::sqrt(rss / static_cast<double>(n));
  const double sigma2 = n > p ? rss / static_cast<double>(n - p) : 0.0;
  fit.stderr_.resize(p);
  for (std::size_t j = 0; j < p; ++j) fit.stderr_[j] = std::sqrt(std::max(0.0, sigma2 * inv[j * p + j]));
  return fit;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double kolmogorov_q(double lambda) {
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    s += (j % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double ks_p_value(double distance, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_q((sn + 0.12 + 0.11 / sn) * distance);
}

double ks_distance(std::vector<double> x, const std::function<double(double)>& cdf, double h) {
  if (x.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double below = static_cast<double>(i) / n;  // empirical CDF just below x[i]
    const double at = static_cast<double>(j) / n;
    // For lattice data the reference just below x[i] is its value at x[i] - h.
    const double ref_below = h > 0 ? cdf(x[i] - h) : cdf(x[i]);
    d = std::max({d, std::abs(at - cdf(x[i])), std::abs(below - ref_below)});
    i = j;
  }
  return d;
}

TwoSampleKs ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j])) v = a[i];
    else v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sn = std::sqrt(ne);
  return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)};
}

Interval bootstrap_mean_ci(std::span<const double> x, double level, int resamples, std::uint64_t seed) {
  if (x.empty() || resamples < 2) throw std::invalid_argument("bootstrap: empty sample");
  Xoshiro256 rng(seed);
  std::vector<double> means(static_cast<std::size_t>(resamples));
  const std::size_t n = x.size();
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[static_cast<std::size_t>(rng.uniform() * static_cast<double>(n))];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1.0 - level) / 2.0;
  auto pick = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::clamp(q * (resamples - 1), 0.0, resamples - 1.0));
    return means[idx];
  };
  return {pick(tail), pick(1.0 - tail)};
}

Interval clopper_pearson(int k, int n, double level) {
  if (n <= 0 || k < 0 || k > n) throw std::invalid_argument("clopper_pearson: bad counts");
  const double a = 1.0 - level;
  Interval ci;
  ci.lo = k == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1, a / 2);
  ci.hi = k == n ? 1.0 : boost::math::ibeta_inv(k + 1, n - k, 1 - a / 2);
  return ci;
}

double aitken_limit(std::span<const double> seq) {
  if (seq.empty()) throw std::invalid_argument("aitken_limit: empty sequence");
  const std::size_t n = seq.size();
  if (n < 3) return seq.back();
  const double x0 = seq[n - 3], x1 = seq[n - 2], x2 = seq[n - 1];
  const double d1 = x1 - x0, d2 = x2 - x1;
  const double denom = d2 - d1;
  // Only extrapolate a geometric-looking tail: same-sign steps shrinking by at most 3/4.
  if (denom == 0.0 || d1 * d2 <= 0.0 || std::abs(d2) > 0.75 * std::abs(d1)) return x2;
  return x2 - d2 * d2 / denom;
}

}  // namespace rgwalk::stats
