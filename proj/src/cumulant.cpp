#include "rgwalk/cumulant.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

#include "rgwalk/error.hpp"
#include "rgwalk/kernel_field.hpp"
#include "rgwalk/rg_engine.hpp"
#include "rgwalk/rng.hpp"
#include "rgwalk/stats.hpp"
#include "rgwalk/steiner.hpp"

namespace rgwalk {

namespace {

constexpr int kMaxPartitionSize = 8;

void enumerate(const std::vector<int>& elems, std::size_t i, Partition& cur, std::vector<Partition>& out) {
  if (i == elems.size()) {
    out.push_back(cur);
    return;
  }
  const std::uint32_t bit = 1u << elems[i];
  for (std::size_t b = 0; b < cur.size(); ++b) {
    cur[b] |= bit;
    enumerate(elems, i + 1, cur, out);
    cur[b] &= ~bit;
  }
  cur.push_back(bit);
  enumerate(elems, i + 1, cur, out);
  cur.pop_back();
}

double moebius_coefficient(std::size_t blocks) {
  double f = 1.0;
  for (std::size_t k = 2; k < blocks; ++k) f *= static_cast<double>(k);
  return (blocks % 2 == 1 ? 1.0 : -1.0) * f;
}

std::uint32_t full_mask(int m) { return m >= 32 ? ~0u : (1u << m) - 1u; }

}  // namespace

std::vector<Partition> partitions_of_mask(std::uint32_t mask) {
  std::vector<int> elems;
  for (int i = 0; i < 32; ++i)
    if (mask & (1u << i)) elems.push_back(i);
  if (static_cast<int>(elems.size()) > kMaxPartitionSize)
    throw Error(ErrorCode::TooLarge, "set partitions are enumerated for at most 8 elements");
  std::vector<Partition> out;
  Partition cur;
  enumerate(elems, 0, cur, out);
  return out;
}

std::vector<Partition> partitions(int m) {
  if (m < 0) throw std::invalid_argument("negative set size");
  if (m > kMaxPartitionSize) throw Error(ErrorCode::TooLarge, "set partitions are enumerated for at most 8 elements");
  return partitions_of_mask(full_mask(m));
}

double connected_correlation(int m, const std::function<double(std::uint32_t)>& moment) {
  double total = 0.0;
  for (const Partition& pi : partitions(m)) {
    double prod = moebius_coefficient(pi.size());
    for (std::uint32_t b : pi) prod *= moment(b);
    total += prod;
  }
  return total;
}

std::vector<double> cumulants_from_moments(int m, std::span<const double> moments) {
  if (m > kMaxPartitionSize) throw Error(ErrorCode::TooLarge, "set partitions are enumerated for at most 8 elements");
  const std::size_t n = std::size_t{1} << m;
  if (moments.size() != n) throw std::invalid_argument("moment table must have 2^m entries");
  std::vector<double> c(n, 0.0);
  for (std::uint32_t mask = 1; mask < n; ++mask)
    for (const Partition& pi : partitions_of_mask(mask)) {
      double prod = moebius_coefficient(pi.size());
      for (std::uint32_t b : pi) prod *= moments[b];
      c[mask] += prod;
    }
  return c;
}

std::vector<double> moments_from_cumulants(int m, std::span<const double> cumulants) {
  if (m > kMaxPartitionSize) throw Error(ErrorCode::TooLarge, "set partitions are enumerated for at most 8 elements");
  const std::size_t n = std::size_t{1} << m;
  if (cumulants.size() != n) throw std::invalid_argument("cumulant table must have 2^m entries");
  std::vector<double> mu(n, 0.0);
  for (std::uint32_t mask = 1; mask < n; ++mask)
    for (const Partition& pi : partitions_of_mask(mask)) {
      double prod = 1.0;
      for (std::uint32_t b : pi) prod *= cumulants[b];
      mu[mask] += prod;
    }
  return mu;
}

int IndexFamily::groups() const noexcept {
  int g = 0;
  for (const auto& f : factors) g = std::max(g, f.group + 1);
  return g;
}

int IndexFamily::diameter() const noexcept {
  if (factors.empty()) return 0;
  int lo = factors.front().t, hi = lo;
  for (const auto& f : factors) {
    lo = std::min(lo, f.t);
    hi = std::max(hi, f.t);
  }
  return hi - lo;
}

void IndexFamily::validate(int max_size, int n0) const {
  check_dim(dim);
  if (n0 < 1 || n0 > 4) throw std::invalid_argument("n0 must be in 1..4");
  if (factors.empty() || size() > max_size)
    throw std::invalid_argument("family size " + std::to_string(size()) + " outside 1.." + std::to_string(max_size));
  if (groups() > n0) throw std::invalid_argument("family has more than n0 groups");
  std::set<std::pair<int, int>> seen;
  for (const auto& f : factors) {
    if (f.group < 0) throw std::invalid_argument("negative group index");
    if (!seen.insert({f.group, f.t}).second) throw std::invalid_argument("repeated time within a group");
  }
}

double tau_weight(const IndexFamily& family, double scale) {
  double disp = 0.0;
  std::vector<Point> ends;
  for (const auto& f : family.factors) {
    const Offset d = f.v - f.u;
    disp += std::sqrt(static_cast<double>(norm2(d))) / scale;
    ends.push_back({f.u[0] / scale, f.u[1] / scale});
    ends.push_back({f.v[0] / scale, f.v[1] / scale});
  }
  return disp + steiner_length(ends);
}

CumulantValue sample_cumulant(std::span<const double> data, int m, std::span<const int> block_of, int blocks) {
  if (m < 1 || m > kMaxPartitionSize) throw Error(ErrorCode::TooLarge, "cumulant order outside 1..8");
  const std::size_t n = data.size() / static_cast<std::size_t>(m);
  if (n == 0 || block_of.size() != n || blocks < 1) throw std::invalid_argument("sample_cumulant: bad sample layout");
  const std::size_t masks = std::size_t{1} << m;

  std::vector<double> mean(static_cast<std::size_t>(m), 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) mean[static_cast<std::size_t>(j)] += data[i * m + j];
  for (auto& v : mean) v /= static_cast<double>(n);

  // Per-block sums of centred products for every subset.
  std::vector<double> sums(static_cast<std::size_t>(blocks) * masks, 0.0);
  std::vector<double> counts(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> prod(masks);
  for (std::size_t i = 0; i < n; ++i) {
    const int b = block_of[i];
    if (b < 0 || b >= blocks) throw std::invalid_argument("block index out of range");
    prod[0] = 1.0;
    for (std::uint32_t mask = 1; mask < masks; ++mask) {
      const int low = std::countr_zero(mask);
      prod[mask] = prod[mask & (mask - 1)] * (data[i * m + low] - mean[static_cast<std::size_t>(low)]);
    }
    double* dst = sums.data() + static_cast<std::size_t>(b) * masks;
    for (std::size_t mask = 1; mask < masks; ++mask) dst[mask] += prod[mask];
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  std::vector<double> total(masks, 0.0);
  for (int b = 0; b < blocks; ++b)
    for (std::size_t mask = 1; mask < masks; ++mask) total[mask] += sums[static_cast<std::size_t>(b) * masks + mask];

  const auto partitions_full = partitions(m);
  std::vector<double> mom(masks);
  const auto estimate = [&](long skip) {
    double cnt = static_cast<double>(n);
    for (std::size_t mask = 1; mask < masks; ++mask) mom[mask] = total[mask];
    if (skip >= 0) {
      cnt -= counts[static_cast<std::size_t>(skip)];
      for (std::size_t mask = 1; mask < masks; ++mask) mom[mask] -= sums[static_cast<std::size_t>(skip) * masks + mask];
    }
    for (std::size_t mask = 1; mask < masks; ++mask) mom[mask] /= cnt;
    double c = 0.0;
    for (const Partition& pi : partitions_full) {
      double p = moebius_coefficient(pi.size());
      for (std::uint32_t b : pi) p *= mom[b];
      c += p;
    }
    return c;
  };
  std::vector<long> used;
  for (int b = 0; b < blocks; ++b)
    if (counts[static_cast<std::size_t>(b)] > 0.0) used.push_back(b);
  const auto jk = stats::jackknife(used.size() >= 2 ? used.size() : 0,
                                   [&](long k) { return estimate(k < 0 ? -1 : used[static_cast<std::size_t>(k)]); });
  return {jk.value, jk.stderr_};
}

DecayScan decay_scan(const EnvField& prototype, const DecayScanConfig& cfg) {
  const Kernel& base = prototype.base();
  const int dim = base.dim();
  const EnvParams& proto = prototype.params();
  const int L = cfg.L;
  const int n = cfg.level;
  if (L < 2 || n < 0 || cfg.max_sep < 0 || cfg.anchors < 1 || cfg.replicas < 2 || cfg.orders.empty())
    throw std::invalid_argument("bad decay scan configuration");
  if (base.scale_base() != L) throw std::invalid_argument("base kernel scale base differs from L");
  for (int m : cfg.orders)
    if (m < 1 || m > cfg.max_order) throw std::invalid_argument("order outside 1..max_order");
  if (cfg.replicas < 100)
    throw Error(ErrorCode::InsufficientReplicas, "decay scan needs at least 100 replicas, got " + std::to_string(cfg.replicas));

  long steps = 1;
  for (int j = 0; j < n; ++j) steps *= static_cast<long>(L) * L;
  const double scale = std::pow(static_cast<double>(L), n);
  const double density = std::pow(scale, dim);
  const Offset jump{static_cast<int>(cfg.jump[0] * scale), dim == 2 ? static_cast<int>(cfg.jump[1] * scale) : 0};
  const int row_radius = static_cast<int>(steps) * base.radius();
  if (!in_window(dim, row_radius, jump)) throw std::invalid_argument("jump lies outside the level-n row window");

  const int span = cfg.max_sep + 1;
  const int coarse_extent = 2 * span;
  EnvParams ep = proto;
  ep.time_extent = static_cast<int>(coarse_extent * steps);
  ep.box_radius = static_cast<int>(2 * row_radius + 8);
  const double lambda = std::isnan(cfg.lambda) ? proto.lambda : cfg.lambda;

  // samples[(replica * anchors + a) * span + s]: density of q_n(t0 + s, x, x + jump).
  const std::size_t nsamples = static_cast<std::size_t>(cfg.replicas) * cfg.anchors;
  std::vector<double> samples(nsamples * span);
  const std::size_t rsize = window_size(dim, row_radius);
  std::vector<double> rows0(nsamples * rsize);  // full row at relative time 0, for the integrated norm
  std::vector<int> block_of(nsamples);
  const int blocks = std::min(cfg.jackknife_blocks, cfg.replicas);
  const bool deterministic = proto.epsilon == 0.0;

  for (int r = 0; r < cfg.replicas; ++r) {
    EnvParams rp = ep;
    rp.seed = derive_seed(proto.seed, static_cast<std::uint64_t>(r));
    const EnvField env = gen_environment(base, rp);
    KernelField p0;
    if (n > 0) p0 = transition_field(env);
    Xoshiro256 rng(derive_seed(rp.seed, 0xdecaULL));
    const int side = 2 * ep.box_radius + 1;
    for (int a = 0; a < cfg.anchors; ++a) {
      const std::size_t idx = static_cast<std::size_t>(r) * cfg.anchors + a;
      block_of[idx] = static_cast<int>(static_cast<long>(r) * blocks / cfg.replicas);
      const int t0 = static_cast<int>(rng() % static_cast<std::uint64_t>(coarse_extent - span + 1));
      Offset x{static_cast<int>(rng() % static_cast<std::uint64_t>(side)) - ep.box_radius, 0};
      if (dim == 2) x[1] = static_cast<int>(rng() % static_cast<std::uint64_t>(side)) - ep.box_radius;
      for (int s = 0; s < span; ++s) {
        const int t = t0 + s;
        std::vector<double> row;
        if (n == 0) {
          row.resize(base.size());
          for (std::size_t w = 0; w < row.size(); ++w) row[w] = env.p(t, x, base.offset(w));
        } else {
          row = propagate(p0, static_cast<int>(t * steps), x, static_cast<int>(steps));
        }
        samples[idx * span + s] = row[window_index(dim, row_radius, jump)] * density;
        if (s == 0)
          for (std::size_t w = 0; w < rsize; ++w) rows0[idx * rsize + w] = row[w] * density;
      }
    }
  }

  DecayScan out;
  out.level = n;
  out.lambda = lambda;
  out.replicas = cfg.replicas;
  std::vector<double> data;
  int zero_rows = 0, zero_resolved = 0;
  for (int m : cfg.orders) {
    for (int s = 0; s <= cfg.max_sep; ++s) {
      if (m == 1 && s > 0) continue;
      IndexFamily fam;
      fam.dim = dim;
      std::vector<int> times(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) {
        times[static_cast<std::size_t>(j)] = m == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(j) * s / (m - 1)));
        fam.factors.push_back({j % cfg.n0, times[static_cast<std::size_t>(j)], {0, 0}, jump});
      }
      fam.validate(cfg.max_order, cfg.n0);
      data.assign(nsamples * static_cast<std::size_t>(m), 0.0);
      for (std::size_t i = 0; i < nsamples; ++i)
        for (int j = 0; j < m; ++j) data[i * m + j] = samples[i * span + times[static_cast<std::size_t>(j)]];
      DecayRow row;
      row.order = m;
      row.separation = s;
      row.estimate.family = fam;
      row.estimate.value = m == 1 ? CumulantValue{} : sample_cumulant(data, m, block_of, blocks);
      row.estimate.tau = tau_weight(fam, scale);
      const double w = std::exp(lambda * row.estimate.tau);
      row.estimate.weighted = w * std::abs(row.estimate.value.value);
      row.estimate.weighted_stderr = w * row.estimate.value.stderr_;
      row.estimate.replicas = cfg.replicas;
      row.resolved = std::abs(row.estimate.value.value) > 2.0 * row.estimate.value.stderr_;
      if (s == 0 && m >= 2) {
        ++zero_rows;
        zero_resolved += row.resolved;
      }
      out.rows.push_back(row);
    }

    DecayFit fit;
    fit.log_inv_delta = -std::log(delta_n(n, L, proto.lambda));
    std::vector<double> xs, ys, ws;
    bool beyond_zero = false;
    for (const auto& row : out.rows)
      if (row.order == m && row.resolved && row.estimate.weighted > 0.0) {
        xs.push_back(row.separation);
        ys.push_back(std::log(row.estimate.weighted));
        const double rel = row.estimate.weighted_stderr / row.estimate.weighted;
        ws.push_back(1.0 / (rel * rel));
        beyond_zero |= row.separation > 0;
      }
    fit.points = static_cast<int>(xs.size());
    if (xs.size() >= 2 && beyond_zero) {
      const auto lf = stats::linear_fit(xs, ys, ws);
      fit.rate = -lf.slope;
      fit.rate_stderr = lf.slope_stderr;
      fit.eps_hat = std::exp(lf.intercept / m);
      fit.super_exponential = false;
    }
    out.fits[m] = fit;
  }

  // d(A) = 0 integrated norm: every offset of the row, order 2.
  std::vector<double> pair(nsamples * 2);
  double norm = 0.0, norm_var = 0.0;
  for (std::size_t w = 0; w < rsize; ++w) {
    for (std::size_t i = 0; i < nsamples; ++i) pair[2 * i] = pair[2 * i + 1] = rows0[i * rsize + w];
    const auto c = sample_cumulant(pair, 2, block_of, blocks);
    const Offset o = window_offset(dim, row_radius, w);
    const double len = std::sqrt(static_cast<double>(norm2(o))) / scale;
    const double weight = std::exp(lambda * 3.0 * len);
    norm += weight * std::abs(c.value);
    norm_var += weight * weight * c.stderr_ * c.stderr_;  // offsets treated as independent
  }
  out.integrated_norm = norm;
  out.integrated_norm_stderr = std::sqrt(norm_var);

  if (!deterministic && zero_rows > 0 && 2 * zero_resolved < zero_rows)
    throw Error(ErrorCode::InsufficientReplicas, "fewer than half of the d(A) = 0 cumulants are resolved");
  return out;
}

}  // namespace rgwalk
