#include "rgwalk/rg_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <functional>
#include <numbers>

#include "rgwalk/error.hpp"
#include "rgwalk/parallel.hpp"
#include "rgwalk/rng.hpp"
#include "rgwalk/stats.hpp"

namespace rgwalk {

namespace {

int log_base(int l, int base) {
  if (l < 1 || base < 2) throw std::invalid_argument("block length must be a positive power of the scale base");
  int k = 0;
  long v = 1;
  while (v < l) {
    v *= base;
    ++k;
  }
  if (v != l) throw std::invalid_argument("block length " + std::to_string(l) + " is not a power of " + std::to_string(base));
  return k;
}

/// a (radius ra) * b (radius rb) as raw window vectors.
std::vector<double> convolve_window(int dim, std::span<const double> a, int ra, std::span<const double> b, int rb) {
  const int r = ra + rb;
  std::vector<double> out(window_size(dim, r), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double m = a[i];
    if (m == 0.0) continue;
    const Offset x = window_offset(dim, ra, i);
    for (std::size_t j = 0; j < b.size(); ++j)
      out[window_index(dim, r, x + window_offset(dim, rb, j))] += m * b[j];
  }
  return out;
}

/// max over offsets and hypercubic images of the z-score of replica-mean differences.
double symmetry_z(int dim, int radius, const std::vector<std::vector<double>>& replica_means) {
  const std::size_t R = replica_means.size();
  if (R < 2) return 0.0;
  const std::size_t n = window_size(dim, radius);
  double worst = 0.0;
  std::array<Offset, 8> images{};
  std::vector<double> d(R);
  for (std::size_t i = 0; i < n; ++i) {
    const Offset w = window_offset(dim, radius, i);
    const int count = hypercubic_images(dim, w, images);
    for (int g = 1; g < count; ++g) {
      const std::size_t j = window_index(dim, radius, images[static_cast<std::size_t>(g)]);
      if (j <= i) continue;
      for (std::size_t r = 0; r < R; ++r) d[r] = replica_means[r][i] - replica_means[r][j];
      const double m = stats::mean(d);
      const double se = stats::stderr_of_mean(d);
      if (se > 0.0) worst = std::max(worst, std::abs(m) / se);
    }
  }
  return worst;
}

/// Running per-entry statistics of renormalized rows at one level.
struct RowAccumulator {
  int dim = 1;
  int radius = 0;
  std::vector<double> sum, lo, hi;
  std::vector<std::vector<double>> replica_means;
  long count = 0;

  RowAccumulator(int d, int r) : dim(d), radius(r) {
    const std::size_t n = window_size(d, r);
    sum.assign(n, 0.0);
    lo.assign(n, std::numeric_limits<double>::infinity());
    hi.assign(n, -std::numeric_limits<double>::infinity());
  }

  void add_replica(const KernelField& f) {
    const std::size_t n = sum.size();
    std::vector<double> rep(n, 0.0);
    long rows = 0;
    for (int t = 0; t < f.time_extent; ++t)
      for (std::size_t s = 0; s < f.sources.size(); ++s) {
        const auto row = f.row(t, s);
        for (std::size_t w = 0; w < n; ++w) {
          rep[w] += row[w];
          lo[w] = std::min(lo[w], row[w]);
          hi[w] = std::max(hi[w], row[w]);
        }
        ++rows;
      }
    for (std::size_t w = 0; w < n; ++w) {
      sum[w] += rep[w];
      rep[w] /= static_cast<double>(rows);
    }
    count += rows;
    replica_means.push_back(std::move(rep));
  }

  [[nodiscard]] std::vector<double> mean() const {
    std::vector<double> m(sum);
    for (auto& v : m) v /= static_cast<double>(count);
    return m;
  }
};

double fixpoint_error(const Kernel& T, double D) {
  const int d = T.dim();
  double worst = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double k = i / 100.0;
    worst = std::max(worst, std::abs(fourier_axis(T, k) - std::exp(-D * k * k / (2.0 * d))));
  }
  return worst;
}

}  // namespace

KernelField renormalize_field(const KernelField& field, int l, const RenormalizeOptions& opts) {
  const int k = log_base(l, field.scale_base);
  if (!field.full()) throw std::invalid_argument("renormalize_field needs rows for every site");
  const int steps = l * l;
  if (field.time_extent % steps != 0)
    throw Error(ErrorCode::DivisibilityError, "l^2 = " + std::to_string(steps) + " does not divide time extent " +
                                                  std::to_string(field.time_extent));
  const int radius = steps * field.row_radius;
  if (radius > field.box_radius)
    throw Error(ErrorCode::BoundaryContamination, "renormalized window of radius " + std::to_string(radius) +
                                                      " wraps the periodic box of radius " +
                                                      std::to_string(field.box_radius));

  KernelField out;
  out.dim = field.dim;
  out.box_radius = field.box_radius;
  out.time_extent = field.time_extent / steps;
  out.row_radius = radius;
  out.level = field.level + k;
  out.scale_base = field.scale_base;
  if (opts.sources.empty()) {
    out.sources = all_sites(field.dim, field.box_radius);
  } else {
    out.sources.reserve(opts.sources.size());
    for (const Offset& s : opts.sources) out.sources.push_back(wrap(field.dim, field.box_radius, s));
  }
  const std::size_t rs = out.row_size();
  const std::size_t ns = out.sources.size();
  out.rows.assign(static_cast<std::size_t>(out.time_extent) * ns * rs, 0.0);

  parallel_for(static_cast<std::size_t>(out.time_extent) * ns, [&](std::size_t job) {
    const int t = static_cast<int>(job / ns);
    const std::size_t s = job % ns;
    const auto dist = propagate(field, t * steps, out.sources[s], steps);
    auto dst = out.row(t, s);
    std::copy(dist.begin(), dist.end(), dst.begin());
  });
  return out;
}

Decomposition decompose(std::span<const KernelField> replicas, bool keep_residuals) {
  if (replicas.size() < 2)
    throw Error(ErrorCode::InsufficientReplicas, "decompose needs at least 2 replicas");
  const KernelField& first = replicas.front();
  for (const auto& f : replicas)
    if (f.dim != first.dim || f.row_radius != first.row_radius || f.level != first.level ||
        f.scale_base != first.scale_base || f.rows.size() != first.rows.size())
      throw std::invalid_argument("replicas of different shape");

  RowAccumulator acc(first.dim, first.row_radius);
  for (const auto& f : replicas) acc.add_replica(f);

  Decomposition out;
  out.raw_mean = Kernel(first.dim, first.row_radius, acc.mean(), first.level, first.scale_base);
  out.mean = symmetrize(out.raw_mean);
  out.symmetry_z = symmetry_z(first.dim, first.row_radius, acc.replica_means);
  if (keep_residuals) {
    const auto T = out.mean.masses();
    out.residuals.reserve(replicas.size());
    for (const auto& f : replicas) {
      KernelField b = f;
      const std::size_t rs = b.row_size();
      for (std::size_t i = 0; i < b.rows.size(); ++i) b.rows[i] -= T[i % rs];
      out.residuals.push_back(std::move(b));
    }
  }
  return out;
}

SpectralKernel fourier_rg_step(const SpectralKernel& s, int L) {
  if (L < 2) throw std::invalid_argument("L must be at least 2");
  if (L != s.scale_base) throw std::invalid_argument("L differs from the kernel's scale base");
  SpectralKernel out = s;
  out.level = s.level + 1;
  out.window_radius = s.window_radius * L * L;
  const int p = L * L;
  for (auto& z : out.samples) z = std::pow(z, p);
  return out;
}

double gaussian_density(double D, int dim, std::array<double, 2> x) {
  const double var = D / dim;
  const double r2 = x[0] * x[0] + (dim == 2 ? x[1] * x[1] : 0.0);
  return std::pow(2.0 * std::numbers::pi * var, -0.5 * dim) * std::exp(-r2 / (2.0 * var));
}

GaussianTarget gaussian_target(double D, int dim, int level, int scale_base, int grid) {
  check_dim(dim);
  if (!(D > 0.0)) throw std::invalid_argument("diffusion constant must be positive");
  const double scale = std::pow(static_cast<double>(scale_base), level);
  const int radius = static_cast<int>(std::ceil(9.0 * std::sqrt(D / dim) * scale)) + 1;
  std::vector<double> m(window_size(dim, radius));
  const double cell = std::pow(scale, -dim);
  double total = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const Offset o = window_offset(dim, radius, i);
    m[i] = gaussian_density(D, dim, {o[0] / scale, o[1] / scale}) * cell;
    total += m[i];
  }
  for (auto& v : m) v /= total;

  GaussianTarget out{symmetrize(Kernel(dim, radius, std::move(m), level, scale_base)), {}};
  int g = grid > 0 ? grid : default_grid(dim);
  while (g < 4 * radius) g *= 2;
  SpectralKernel& s = out.spectral;
  s.dim = dim;
  s.grid = g;
  s.level = level;
  s.scale_base = scale_base;
  s.window_radius = radius;
  s.samples.resize(dim == 1 ? static_cast<std::size_t>(g) : static_cast<std::size_t>(g) * g);
  const int g1 = dim == 1 ? 1 : g;
  for (int m1 = 0; m1 < g1; ++m1)
    for (int m0 = 0; m0 < g; ++m0) {
      const double k0 = s.physical_k(m0);
      const double k1 = dim == 1 ? 0.0 : s.physical_k(m1);
      s.samples[static_cast<std::size_t>(m0) + static_cast<std::size_t>(g) * m1] =
          std::exp(-D * (k0 * k0 + k1 * k1) / (2.0 * dim));
    }
  return out;
}

KernelField linearized_rg(const KernelField& b, const Kernel& T, int L) {
  if (!b.full()) throw std::invalid_argument("linearized_rg needs perturbation rows for every site");
  if (T.dim() != b.dim || T.level() != b.level) throw std::invalid_argument("kernel and perturbation levels differ");
  if (L != b.scale_base) throw std::invalid_argument("L differs from the field's scale base");
  const int steps = L * L;
  if (b.time_extent % steps != 0)
    throw Error(ErrorCode::DivisibilityError, "L^2 does not divide the time extent");
  const int dim = b.dim;
  const int rt = T.radius();
  const int rb = b.row_radius;
  const int radius = (steps - 1) * rt + rb;
  if (radius > b.box_radius)
    throw Error(ErrorCode::BoundaryContamination, "linearized window wraps the periodic box");

  ConvolveOptions exact{0.0, 1 << 20};
  std::vector<Kernel> powers;
  powers.push_back(Kernel::delta(dim, T.level(), T.scale_base()));
  for (int j = 1; j < steps; ++j) powers.push_back(convolve(powers.back(), T, exact));

  KernelField out;
  out.dim = dim;
  out.box_radius = b.box_radius;
  out.time_extent = b.time_extent / steps;
  out.row_radius = radius;
  out.level = b.level + 1;
  out.scale_base = b.scale_base;
  out.sources = all_sites(dim, b.box_radius);
  const std::size_t rs = out.row_size();
  const std::size_t ns = out.sources.size();
  out.rows.assign(static_cast<std::size_t>(out.time_extent) * ns * rs, 0.0);

  parallel_for(static_cast<std::size_t>(out.time_extent) * ns, [&](std::size_t job) {
    const int tc = static_cast<int>(job / ns);
    const std::size_t s = job % ns;
    const Offset src = out.sources[s];
    auto dst = out.row(tc, s);
    for (int n = 0; n < steps; ++n) {
      const Kernel& a = powers[static_cast<std::size_t>(n)];
      const int ra = a.radius();
      // c = delta_src T^n b_t, radius ra + rb
      std::vector<double> c(window_size(dim, ra + rb), 0.0);
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double m = a.masses()[i];
        if (m == 0.0) continue;
        const Offset x = a.offset(i);
        const auto row = b.row(tc * steps + n, b.site_index(src + x));
        for (std::size_t w = 0; w < row.size(); ++w)
          c[window_index(dim, ra + rb, x + window_offset(dim, rb, w))] += m * row[w];
      }
      const Kernel& tail = powers[static_cast<std::size_t>(steps - n - 1)];
      const auto term = convolve_window(dim, c, ra + rb, tail.masses(), tail.radius());
      const int rterm = ra + rb + tail.radius();
      for (std::size_t i = 0; i < term.size(); ++i)
        dst[window_index(dim, radius, window_offset(dim, rterm, i))] += term[i];
    }
  });
  return out;
}

ZetaFit fit_zeta(std::span<const double> k, std::span<const double> beta_hat) {
  if (k.size() != beta_hat.size() || k.size() < 3) throw std::invalid_argument("fit_zeta needs >= 3 samples");
  const auto fit = stats::basis_fit(k, beta_hat, {[](double x) { return x * x; },
                                                  [](double x) { return x * x * x * x; }});
  ZetaFit out{fit.coef[0], fit.coef[1], fit.stderr_[0], fit.residual_rms};
  const double half = 2.0 * out.zeta_stderr;
  if (half > 1e-12 && half >= 3.0 * std::abs(out.zeta))
    throw Error(ErrorCode::FitUnstable, "zeta = " + std::to_string(out.zeta) + " +- " + std::to_string(half) +
                                            " is not resolved by the k^2 + k^4 fit");
  return out;
}

ZetaFit extract_zeta(const Kernel& Tn, const Kernel& Tn1, int L, const ZetaOptions& opts) {
  if (Tn.dim() != Tn1.dim() || Tn1.level() != Tn.level() + 1 || Tn.scale_base() != L || Tn1.scale_base() != L)
    throw Error(ErrorCode::InvalidKernel, "extract_zeta needs kernels at consecutive levels of the same base");
  const int p = L * L;
  const double b0 = fourier_axis(Tn1, 0.0) - std::pow(fourier_axis(Tn, 0.0), p);
  if (std::abs(b0) > 1e-10) throw Error(ErrorCode::InvalidKernel, "kernels are not normalized");
  if (opts.samples < 3 || !(opts.k_max > 0.0)) throw std::invalid_argument("bad zeta fit window");
  std::vector<double> k(static_cast<std::size_t>(opts.samples)), beta(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) {
    k[j] = opts.k_max * static_cast<double>(j + 1) / static_cast<double>(k.size());
    beta[j] = fourier_axis(Tn1, k[j]) - std::pow(fourier_axis(Tn, k[j] / L), p);
  }
  return fit_zeta(k, beta);
}

double delta_n(int n, int L, double lambda) {
  return std::pow(static_cast<double>(L), -0.5 * n) * std::exp(-lambda);
}

RGState initial_state(const Kernel& base, int L, double lambda) {
  RGState s;
  s.level = 0;
  s.mean_kernel = base;
  s.rho = 1.0;
  s.D0 = physical_second_moment(base);
  s.D = s.D0;
  s.scale_base = L;
  s.lambda = lambda;
  s.delta = delta_n(0, L, lambda);
  return s;
}

RGState rho_update(const RGState& state, double zeta) {
  const int d = state.mean_kernel.dim();
  const double r2 = state.rho * state.rho - 2.0 * d * zeta / state.D0;
  if (!std::isfinite(r2) || r2 <= 0.0)
    throw Error(ErrorCode::FlowDiverged, "rho^2 = " + std::to_string(r2) + " at level " + std::to_string(state.level + 1));
  RGState next = state;
  next.level = state.level + 1;
  next.rho = std::sqrt(r2);
  next.D = r2 * state.D0;
  next.delta = delta_n(next.level, state.scale_base, state.lambda);
  return next;
}

double diffusion_at_time(const EnvField& env, Offset source, int steps) {
  const auto dist = propagate_env(env, 0, source, steps);
  const int radius = steps * env.row_radius();
  double m2 = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i)
    m2 += dist[i] * static_cast<double>(norm2(window_offset(env.dim(), radius, i)));
  return m2 / steps;
}

double diffusion_of_row(std::span<const double> row, int dim, int row_radius, double scale) {
  double m2 = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i)
    m2 += row[i] * static_cast<double>(norm2(window_offset(dim, row_radius, i)));
  return m2 / (scale * scale);
}

FlowResult run_flow(const FlowConfig& cfg) {
  const Kernel& base = cfg.base;
  const int dim = base.dim();
  const int L = cfg.L;
  const int N = cfg.levels;
  if (L < 2 || N < 1 || cfg.sources < 1 || cfg.blocks < 1) throw std::invalid_argument("bad flow configuration");
  if (cfg.replicas < 2) throw Error(ErrorCode::InsufficientReplicas, "run_flow needs at least 2 replicas");
  if (cfg.antithetic && cfg.replicas % 2 != 0) throw std::invalid_argument("antithetic replicas come in pairs");
  if (base.level() != 0 || base.scale_base() != L) throw std::invalid_argument("base kernel must be level 0 with scale base L");

  long horizon = 1;
  for (int n = 0; n < N; ++n) horizon *= static_cast<long>(L) * L;
  EnvParams ep = cfg.env;
  ep.time_extent = static_cast<int>(horizon * cfg.blocks);
  ep.box_radius = static_cast<int>(horizon * base.radius());

  std::vector<RowAccumulator> acc;
  std::vector<double> identity(static_cast<std::size_t>(N + 1), 0.0);
  for (int n = 0; n <= N; ++n) {
    long steps = 1;
    for (int j = 0; j < n; ++j) steps *= static_cast<long>(L) * L;
    acc.emplace_back(dim, static_cast<int>(steps * base.radius()));
  }

  for (int r = 0; r < cfg.replicas; ++r) {
    EnvParams rp = ep;
    const int pair = cfg.antithetic ? r / 2 : r;
    rp.seed = derive_seed(cfg.env.seed, static_cast<std::uint64_t>(pair));
    rp.antithetic = cfg.antithetic && (r % 2 == 1);
    const EnvField env = gen_environment(base, rp);
    const KernelField p0 = transition_field(env);

    Xoshiro256 rng(derive_seed(rp.seed, 0x5ce5ULL));
    RenormalizeOptions opts;
    const int side = 2 * ep.box_radius + 1;
    for (int s = 0; s < cfg.sources; ++s) {
      Offset o{static_cast<int>(rng() % static_cast<std::uint64_t>(side)) - ep.box_radius, 0};
      if (dim == 2) o[1] = static_cast<int>(rng() % static_cast<std::uint64_t>(side)) - ep.box_radius;
      opts.sources.push_back(o);
    }

    long l = 1;
    for (int n = 0; n <= N; ++n) {
      const KernelField pn = renormalize_field(p0, static_cast<int>(l), opts);
      acc[static_cast<std::size_t>(n)].add_replica(pn);
      if (r == 0) {
        const double direct = diffusion_at_time(env, pn.sources[0], static_cast<int>(l * l));
        const double via_row = diffusion_of_row(pn.row(0, 0), dim, pn.row_radius, pn.scale());
        identity[static_cast<std::size_t>(n)] = std::abs(direct - via_row);
      }
      l *= L;
    }
  }

  // Units are antithetic pairs (or single replicas); jackknife blocks group whole units.
  const int per_unit = cfg.antithetic ? 2 : 1;
  const int units = cfg.replicas / per_unit;
  const auto unit_means = [&](const RowAccumulator& a) {
    std::vector<std::vector<double>> um(static_cast<std::size_t>(units));
    for (int u = 0; u < units; ++u) {
      auto& m = um[static_cast<std::size_t>(u)];
      m.assign(a.sum.size(), 0.0);
      for (int j = 0; j < per_unit; ++j) {
        const auto& rm = a.replica_means[static_cast<std::size_t>(u * per_unit + j)];
        for (std::size_t w = 0; w < m.size(); ++w) m[w] += rm[w] / per_unit;
      }
    }
    return um;
  };
  std::vector<std::vector<std::vector<double>>> unit_level(static_cast<std::size_t>(N + 1));
  for (int n = 0; n <= N; ++n) unit_level[static_cast<std::size_t>(n)] = unit_means(acc[static_cast<std::size_t>(n)]);

  const int jk = std::min(units, cfg.max_jackknife_blocks);
  const auto block_of = [&](int u) { return static_cast<long>(u) * jk / units; };

  // Level means with jackknife block `skip` removed (-1: all units). Level 0 is the exact base kernel.
  const auto level_means = [&](long skip) {
    std::vector<Kernel> means;
    means.push_back(base);
    for (int n = 1; n <= N; ++n) {
      const auto& um = unit_level[static_cast<std::size_t>(n)];
      std::vector<double> m(um.front().size(), 0.0);
      int used = 0;
      for (int u = 0; u < units; ++u) {
        if (block_of(u) == skip) continue;
        for (std::size_t w = 0; w < m.size(); ++w) m[w] += um[static_cast<std::size_t>(u)][w];
        ++used;
      }
      for (auto& v : m) v /= used;
      means.push_back(symmetrize(Kernel(dim, acc[static_cast<std::size_t>(n)].radius, std::move(m), n, L)));
    }
    return means;
  };

  struct Chain {
    std::vector<RGState> states;
    std::vector<ZetaFit> zetas;
    double limit = 0.0;
  };
  const auto chain = [&](const std::vector<Kernel>& means) {
    Chain c;
    RGState state = initial_state(base, L, cfg.env.lambda);
    std::vector<double> Ds;
    for (int n = 0; n <= N; ++n) {
      state.mean_kernel = means[static_cast<std::size_t>(n)];
      c.states.push_back(state);
      Ds.push_back(state.D);
      if (n < N) {
        c.zetas.push_back(extract_zeta(means[static_cast<std::size_t>(n)], means[static_cast<std::size_t>(n + 1)], L, cfg.zeta));
        state = rho_update(state, c.zetas.back().zeta);
      }
    }
    c.limit = stats::aitken_limit(Ds);
    return c;
  };

  const std::vector<Kernel> means = level_means(-1);
  const Chain full = chain(means);
  std::vector<Chain> drops;
  if (jk >= 2)
    for (long b = 0; b < jk; ++b) drops.push_back(chain(level_means(b)));
  const auto jk_stderr = [&](const std::function<double(const Chain&)>& f) {
    if (drops.size() < 2) return 0.0;
    const double g = static_cast<double>(drops.size());
    double m = 0.0;
    for (const auto& c : drops) m += f(c);
    m /= g;
    double ss = 0.0;
    for (const auto& c : drops) ss += (f(c) - m) * (f(c) - m);
    return std::sqrt((g - 1.0) / g * ss);
  };

  FlowResult out;
  out.states = full.states;
  out.jackknife_blocks = jk;
  for (int n = 0; n <= N; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const auto& a = acc[un];
    const RGState& state = full.states[un];
    const Kernel& T = means[un];
    LevelDiagnostics diag;
    diag.level = n;
    diag.D = state.D;
    diag.D_stderr = jk_stderr([un](const Chain& c) { return c.states[un].D; });
    diag.D_moment = physical_second_moment(T);
    diag.rho = state.rho;
    diag.delta = state.delta;
    diag.identity_err = identity[un];
    diag.symmetry_z = symmetry_z(dim, a.radius, unit_level[un]);
    const auto tm = T.masses();
    const double cells = std::pow(T.scale(), dim);
    for (std::size_t w = 0; w < tm.size(); ++w)
      diag.b_sup = std::max(diag.b_sup, std::max(a.hi[w] - tm[w], tm[w] - a.lo[w]) * cells);
    diag.fixpoint_err = fixpoint_error(T, state.D);
    if (n < N) {
      diag.zeta = full.zetas[un].zeta;
      diag.zeta_fit_stderr = full.zetas[un].zeta_stderr;
      diag.zeta_stderr = jk_stderr([un](const Chain& c) { return c.zetas[un].zeta; });
      diag.increment = full.states[un + 1].D - state.D;
      diag.increment_stderr = jk_stderr([un](const Chain& c) { return c.states[un + 1].D - c.states[un].D; });
    }
    out.levels.push_back(diag);
  }
  out.D_limit = full.limit;
  out.D_limit_stderr = jk_stderr([](const Chain& c) { return c.limit; });
  return out;
}

}  // namespace rgwalk
