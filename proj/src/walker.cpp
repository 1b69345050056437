#include "rgwalk/walker.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "rgwalk/error.hpp"
#include "rgwalk/parallel.hpp"
#include "rgwalk/rng.hpp"

namespace rgwalk {

namespace {

constexpr std::size_t kChunk = 2048;  // paths per work item; fixed so output ignores the worker count

std::vector<int> make_checkpoints(int T, const WalkOptions& opts) {
  std::vector<int> c{0};
  if (opts.full_paths) {
    for (int t = 1; t <= T; ++t) c.push_back(t);
    return c;
  }
  if (opts.checkpoints.empty()) {
    for (int q = 1; q <= 3; ++q) c.push_back(static_cast<int>(std::lround(q * T / 4.0)));
  } else {
    for (int t : opts.checkpoints) {
      if (t <= 0 || t > T) throw std::invalid_argument("checkpoint outside (0, T]");
      c.push_back(t);
    }
  }
  c.push_back(T);
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

int level_of(int T, int L) {
  long v = 1;
  for (int k = 0; k < 31; ++k) {
    if (v == T) return k;
    v *= static_cast<long>(L) * L;
    if (v > T) break;
  }
  return -1;
}

}  // namespace

long WalkEnsemble::checkpoint_index(int t) const noexcept {
  const auto it = std::lower_bound(checkpoints.begin(), checkpoints.end(), t);
  if (it == checkpoints.end() || *it != t) return -1;
  return it - checkpoints.begin();
}

WalkEnsemble sample_walks(const EnvField& field, int T, std::size_t count, std::uint64_t seed,
                          const WalkOptions& opts) {
  if (T < 1 || T > field.time_extent()) throw std::invalid_argument("horizon outside the environment's time extent");
  if (count == 0) throw std::invalid_argument("no paths requested");
  const int dim = field.dim();
  const int B = field.box_radius();
  const int R = field.row_radius();
  const int limit = B - R;  // a walk at |x| <= limit cannot see the wrap in its next step
  if (limit < 0) throw Error(ErrorCode::BoundaryContamination, "box is smaller than one row");

  WalkEnsemble out;
  out.dim = dim;
  out.horizon = T;
  out.L = opts.L;
  out.level = level_of(T, opts.L);
  out.seed = seed;
  out.checkpoints = make_checkpoints(T, opts);
  const std::size_t nc = out.checkpoints.size();
  out.positions.assign(count * nc, Offset{0, 0});

  const Kernel& base = field.base();
  const std::size_t rs = base.size();
  std::vector<Offset> offs(rs);
  for (std::size_t w = 0; w < rs; ++w) offs[w] = base.offset(w);
  const auto bm = base.masses();

  const std::size_t chunks = (count + kChunk - 1) / kChunk;
  std::vector<long> excursion(chunks, 0);
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    const std::size_t hi = std::min(count, lo + kChunk);
    const std::size_t n = hi - lo;
    std::vector<Xoshiro256> rng;
    rng.reserve(n);
    for (std::size_t i = lo; i < hi; ++i) rng.emplace_back(derive_seed(seed, i));
    std::vector<Offset> x(n, Offset{0, 0});
    long worst = 0;
    std::size_t next_cp = 1;
    for (int t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const Offset pos = x[i];
        const auto beta = field.beta_row(t, window_index(dim, B, pos));
        const double u = rng[i].uniform();
        double cum = 0.0;
        std::size_t pick = rs;
        std::size_t last_positive = 0;
        for (std::size_t w = 0; w < rs; ++w) {
          const double p = bm[w] + beta[w];
          if (p > 0.0) last_positive = w;
          cum += p;
          if (u < cum) {
            pick = w;
            break;
          }
        }
        if (pick == rs) pick = last_positive;
        const Offset np = pos + offs[pick];
        const long ex = norm_inf(np);
        if (ex > worst) {
          worst = ex;
          if (ex > limit)
            throw Error(ErrorCode::BoundaryContamination,
                        "walk reached |x| = " + std::to_string(ex) + " in a box of radius " + std::to_string(B));
        }
        x[i] = np;
      }
      if (next_cp < nc && out.checkpoints[next_cp] == t + 1) {
        for (std::size_t i = 0; i < n; ++i) out.positions[(lo + i) * nc + next_cp] = x[i];
        ++next_cp;
      }
    }
    excursion[c] = worst;
  });
  out.max_excursion = *std::max_element(excursion.begin(), excursion.end());
  return out;
}

WalkEnsemble synthetic_wiener(int dim, int T, std::size_t count, double D, std::uint64_t seed, const WalkOptions& opts) {
  check_dim(dim);
  if (T < 1 || count == 0 || !(D > 0.0)) throw std::invalid_argument("bad synthetic Wiener request");
  WalkEnsemble out;
  out.dim = dim;
  out.horizon = T;
  out.L = opts.L;
  out.level = level_of(T, opts.L);
  out.seed = seed;
  out.checkpoints = make_checkpoints(T, opts);
  const std::size_t nc = out.checkpoints.size();
  out.positions.assign(count * nc, Offset{0, 0});
  const double sqrtT = std::sqrt(static_cast<double>(T));
  parallel_for((count + kChunk - 1) / kChunk, [&](std::size_t c) {
    const std::size_t hi = std::min(count, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < hi; ++i) {
      Xoshiro256 rng(derive_seed(seed, i));
      std::normal_distribution<double> normal;
      std::array<double, 2> b{0.0, 0.0};
      for (std::size_t j = 1; j < nc; ++j) {
        const double dt = static_cast<double>(out.checkpoints[j] - out.checkpoints[j - 1]) / T;
        const double sd = std::sqrt(dt * D / dim);
        Offset pos{0, 0};
        for (int a = 0; a < dim; ++a) {
          b[static_cast<std::size_t>(a)] += sd * normal(rng);
          pos[static_cast<std::size_t>(a)] = static_cast<int>(std::lround(sqrtT * b[static_cast<std::size_t>(a)]));
        }
        out.positions[i * nc + j] = pos;
      }
    }
  });
  long worst = 0;
  for (const Offset& p : out.positions) worst = std::max<long>(worst, norm_inf(p));
  out.max_excursion = worst;
  return out;
}

double RescaledPaths::at(std::size_t path, double t, int coordinate) const {
  const WalkEnsemble& e = *ensemble;
  if (t < 0.0 || t > 1.0) throw std::invalid_argument("rescaled time outside [0, 1]");
  const double x = t * e.horizon;
  const double sqrtT = std::sqrt(static_cast<double>(e.horizon));
  const auto c = static_cast<std::size_t>(coordinate);
  const long exact = std::abs(x - std::round(x)) < 1e-9 ? e.checkpoint_index(static_cast<int>(std::lround(x))) : -1;
  if (exact >= 0) return e.at(path, static_cast<std::size_t>(exact))[c] / sqrtT;
  const int i = static_cast<int>(std::floor(x)) + 1;
  const long a = e.checkpoint_index(i - 1), b = e.checkpoint_index(i);
  if (a < 0 || b < 0) throw std::invalid_argument("time not resolved by the stored checkpoints");
  const double w0 = e.at(path, static_cast<std::size_t>(a))[c];
  const double w1 = e.at(path, static_cast<std::size_t>(b))[c];
  return (w0 + (x - i + 1) * (w1 - w0)) / sqrtT;
}

std::vector<double> RescaledPaths::marginal(double t, int coordinate) const {
  std::vector<double> v(count());
  for (std::size_t p = 0; p < v.size(); ++p) v[p] = at(p, t, coordinate);
  return v;
}

RescaledPaths rescale_paths(const WalkEnsemble& ensemble) {
  if (ensemble.horizon < 1 || ensemble.checkpoints.empty()) throw std::invalid_argument("ensemble has no horizon");
  return RescaledPaths{&ensemble};
}

DiffusionEstimate estimate_diffusion(const WalkEnsemble& ensemble, int resamples) {
  const std::size_t n = ensemble.count();
  if (n < 100) throw Error(ErrorCode::InsufficientReplicas, "MC diffusion estimate needs >= 100 paths");
  const std::size_t last = ensemble.checkpoints.size() - 1;
  std::vector<double> v(n);
  for (std::size_t p = 0; p < n; ++p)
    v[p] = static_cast<double>(norm2(ensemble.at(p, last))) / ensemble.horizon;
  DiffusionEstimate d;
  d.D = stats::mean(v);
  d.stderr_ = stats::stderr_of_mean(v);
  d.ci = stats::bootstrap_mean_ci(v, 0.95, resamples, derive_seed(ensemble.seed, 0xb007ULL));
  return d;
}

DiffusionEstimate estimate_diffusion(const Kernel& kernel) {
  DiffusionEstimate d;
  d.D = physical_second_moment(kernel);
  d.ci = {d.D, d.D};
  return d;
}

}  // namespace rgwalk
