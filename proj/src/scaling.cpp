#include "rgwalk/scaling.hpp"

#include <algorithm>
#include <cmath>

#include "rgwalk/error.hpp"
#include "rgwalk/stats.hpp"

namespace rgwalk {

namespace {

double ks_gaussian_distance(std::vector<double> x, double variance, double h) {
  const double sd = std::sqrt(variance);
  return stats::ks_distance(std::move(x), [&](double v) { return stats::normal_cdf((h > 0.0 ? v + 0.5 * h : v) / sd); }, h);
}

struct CfStat {
  double chi2 = 0.0;
  double p = 1.0;
};

CfStat cf_stat(std::span<const double> x, double variance, double k) {
  const double n = static_cast<double>(x.size());
  double c = 0.0, s = 0.0;
  for (double v : x) {
    c += std::cos(k * v);
    s += std::sin(k * v);
  }
  c /= n;
  s /= n;
  const double phi = std::exp(-0.5 * k * k * variance);
  const double phi2 = std::exp(-2.0 * k * k * variance);
  const double var_c = std::max(0.5 * (1.0 + phi2) - phi * phi, 1e-300);
  const double var_s = std::max(0.5 * (1.0 - phi2), 1e-300);
  CfStat out;
  out.chi2 = n * (c - phi) * (c - phi) / var_c + n * s * s / var_s;
  out.p = std::exp(-0.5 * out.chi2);  // chi^2 survival with 2 degrees of freedom
  return out;
}

double moment_z(std::span<const double> x, double variance, int order) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += order == 2 ? v * v : v * v * v * v;
  m /= n;
  const double expect = order == 2 ? variance : 3.0 * variance * variance;
  const double sd = order == 2 ? std::sqrt(2.0) * variance : std::sqrt(96.0) * variance * variance;
  return (m - expect) / (sd / std::sqrt(n));
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double ma = stats::mean(a), mb = stats::mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

}  // namespace

double ks_gaussian_p(std::vector<double> x, double variance, double h) {
  const std::size_t n = x.size();
  return stats::ks_p_value(ks_gaussian_distance(std::move(x), variance, h), n);
}

double cf_gaussian_p(std::span<const double> x, double variance, double k) { return cf_stat(x, variance, k).p; }

double moment_gaussian_p(std::span<const double> x, double variance, int order) {
  if (order != 2 && order != 4) throw std::invalid_argument("moment tests cover orders 2 and 4");
  return stats::normal_two_sided_p(moment_z(x, variance, order));
}

FddReport fdd_compare(const RescaledPaths& paths, double D, std::span<const double> times, double alpha,
                      const FddOptions& opts) {
  const std::size_t n = paths.count();
  if (n < static_cast<std::size_t>(opts.min_count))
    throw std::invalid_argument("fdd_compare needs at least " + std::to_string(opts.min_count) + " paths");
  if (!(D > 0.0) || !(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bad D or alpha");
  if (times.empty() || times.size() > 4) throw std::invalid_argument("between 1 and 4 times");
  for (std::size_t i = 0; i < times.size(); ++i)
    if (!(times[i] > 0.0 && times[i] <= 1.0) || (i > 0 && times[i] <= times[i - 1]))
      throw std::invalid_argument("times must be sorted within (0, 1]");

  const WalkEnsemble& e = *paths.ensemble;
  const int dim = e.dim;
  const double h = 1.0 / std::sqrt(static_cast<double>(e.horizon));
  FddReport rep;
  rep.times.assign(times.begin(), times.end());
  rep.level = e.level;
  rep.D = D;
  rep.alpha = alpha;
  rep.count = n;

  std::vector<double> tau{0.0};
  tau.insert(tau.end(), times.begin(), times.end());
  // marg[j][c]: omega(tau_j) coordinate c
  std::vector<std::vector<std::vector<double>>> marg(tau.size());
  for (std::size_t j = 0; j < tau.size(); ++j)
    for (int c = 0; c < dim; ++c)
      marg[j].push_back(j == 0 ? std::vector<double>(n, 0.0) : paths.marginal(tau[j], c));

  for (std::size_t j = 1; j < tau.size(); ++j)
    for (int c = 0; c < dim; ++c) {
      const auto& x = marg[j][static_cast<std::size_t>(c)];
      const double var = tau[j] * D / dim;
      const double ks = ks_gaussian_distance(x, var, h);
      rep.tests.push_back({"ks", 0.0, tau[j], c, ks, stats::ks_p_value(ks, n), true});
      for (int k : opts.cf_wavenumbers) {
        const auto cf = cf_stat(x, var, k);
        rep.tests.push_back({"cf_k" + std::to_string(k), 0.0, tau[j], c, cf.chi2, cf.p, true});
      }
      for (int order : {2, 4}) {
        const double z = moment_z(x, var, order);
        rep.tests.push_back({"moment" + std::to_string(order), 0.0, tau[j], c, z, stats::normal_two_sided_p(z), true});
      }
      if (opts.increments && j >= 2) {
        std::vector<double> inc(n);
        const auto& prev = marg[j - 1][static_cast<std::size_t>(c)];
        for (std::size_t p = 0; p < n; ++p) inc[p] = x[p] - prev[p];
        const double d = ks_gaussian_distance(inc, (tau[j] - tau[j - 1]) * D / dim, h);
        rep.tests.push_back({"ks_increment", tau[j - 1], tau[j], c, d, stats::ks_p_value(d, n), true});
      }
    }

  const double bound = 4.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t j = 1; j + 1 < tau.size(); ++j)
    for (int c = 0; c < dim; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      std::vector<double> a(n), b(n);
      for (std::size_t p = 0; p < n; ++p) {
        a[p] = marg[j][cc][p] - marg[j - 1][cc][p];
        b[p] = marg[j + 1][cc][p] - marg[j][cc][p];
      }
      const double r = correlation(a, b);
      rep.correlations.push_back({tau[j - 1], tau[j], tau[j + 1], c, r, bound, std::abs(r) < bound});
    }

  rep.alpha_per_test = alpha / static_cast<double>(rep.tests.size());
  rep.pass = true;
  for (auto& t : rep.tests) {
    t.pass = t.p_value >= rep.alpha_per_test;
    rep.pass = rep.pass && t.pass;
  }
  for (const auto& c : rep.correlations) rep.pass = rep.pass && c.pass;
  return rep;
}

ConvergenceReport convergence_report(const FlowResult& flow, double epsilon, std::span<const FddReport> fdd) {
  const std::size_t levels = flow.levels.size();
  if (levels < 3 || flow.states.size() != levels) throw std::invalid_argument("convergence_report needs >= 3 levels");
  ConvergenceReport rep;
  rep.D0 = flow.states.front().D0;
  rep.D_limit = flow.D_limit;
  rep.epsilon = epsilon;
  rep.shift_over_eps2 = epsilon > 0.0 ? std::abs(flow.D_limit - rep.D0) / (epsilon * epsilon) : 0.0;

  for (std::size_t n = 0; n < levels; ++n) {
    const auto& diag = flow.levels[n];
    const Kernel& T = flow.states[n].mean_kernel;
    const int dim = T.dim();
    ConvergenceRow row;
    row.level = diag.level;
    row.D = diag.D;
    row.increment = diag.increment;
    row.fixpoint_err = diag.fixpoint_err;
    const double scale = T.scale();
    for (std::size_t i = 0; i < T.size(); ++i) {
      const Offset o = T.offset(i);
      const std::array<double, 2> x{o[0] / scale, o[1] / scale};
      const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
      const double diff = std::abs(T.density(o) - gaussian_density(diag.D, dim, x));
      row.sup_err = std::max(row.sup_err, std::exp(r) * diff);
    }
    const int L = flow.states[n].scale_base;
    row.delta = epsilon > 0.0 ? diag.delta : std::pow(static_cast<double>(L), -0.5 * diag.level);
    row.ratio = row.sup_err / row.delta;
    for (const auto& f : fdd)
      if (f.level == diag.level)
        for (const auto& t : f.tests)
          if (t.name == "ks") row.ks_distance = std::max(row.ks_distance, t.statistic);
    if (n >= 1) rep.max_ratio = std::max(rep.max_ratio, row.ratio);
    rep.rows.push_back(row);
  }
  // Increments exist for levels 0..N-1; compare consecutive ones from level 1 on.
  for (std::size_t n = 2; n + 1 < levels; ++n) {
    const auto& a = flow.levels[n - 1];
    const auto& b = flow.levels[n];
    // Round-off floor: flows without disorder have increments at machine precision.
    const double tol = 2.0 * std::hypot(a.increment_stderr, b.increment_stderr) + 1e-12;
    if (std::abs(b.increment) > std::abs(a.increment) + tol) rep.cauchy = false;
  }
  return rep;
}

}  // namespace rgwalk
