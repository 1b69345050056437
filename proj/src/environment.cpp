#include "rgwalk/environment.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "rgwalk/error.hpp"
#include "rgwalk/rng.hpp"
#include "rgwalk/stats.hpp"

namespace rgwalk {

static_assert(std::endian::native == std::endian::little, "env container assumes little endian");

namespace {

constexpr char kEnvMagic[8] = {'R', 'G', 'W', 'E', 'N', 'V', '0', '1'};

void check_params(const Kernel& base, const EnvParams& p) {
  if (!(p.epsilon >= 0.0 && p.epsilon < 1.0))
    throw Error(ErrorCode::InvalidDisorder, "epsilon must satisfy 0 <= epsilon < 1");
  if (p.time_extent < 1 || p.box_radius < 1)
    throw std::invalid_argument("environment extents must be >= 1");
  if (base.radius() > p.box_radius)
    throw Error(ErrorCode::BoundaryContamination, "kernel window wider than the periodic box");
  if (!(p.lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
}

std::array<Offset, 4> neighbours(int dim, Offset x) {
  return {Offset{x[0] + 1, x[1]}, Offset{x[0] - 1, x[1]}, dim == 2 ? Offset{x[0], x[1] + 1} : x,
          dim == 2 ? Offset{x[0], x[1] - 1} : x};
}

// Spins of a lazily refreshed heat-bath chain: each step every site is
// refreshed with probability 1 - e^-lambda from the heat-bath law given the
// previous configuration of its nearest neighbours.
std::vector<double> markov_driving(int dim, const EnvParams& p) {
  const int B = p.box_radius;
  const std::size_t sites = window_size(dim, B);
  Xoshiro256 rng(derive_seed(p.seed, 0x6d61726bULL));
  std::vector<int> spin(sites), next(sites);
  for (auto& s : spin) s = rng.uniform() < 0.5 ? 1 : -1;
  const double refresh = 1.0 - std::exp(-p.lambda);
  const int nn = 2 * dim;

  std::vector<double> out(static_cast<std::size_t>(p.time_extent) * sites);
  for (int step = -p.burn_in; step < p.time_extent; ++step) {
    if (step > -p.burn_in) {
      for (std::size_t i = 0; i < sites; ++i) {
        const double u_refresh = rng.uniform();
        const double u_value = rng.uniform();
        if (u_refresh >= refresh) {
          next[i] = spin[i];
          continue;
        }
        const Offset x = window_offset(dim, B, i);
        const auto nb = neighbours(dim, x);
        int field = 0;
        for (int k = 0; k < nn; ++k) field += spin[window_index(dim, B, wrap(dim, B, nb[k]))];
        const double p_up = 0.5 * (1.0 + std::tanh(p.coupling * field));
        next[i] = u_value < p_up ? 1 : -1;
      }
      spin.swap(next);
    }
    if (step >= 0)
      for (std::size_t i = 0; i < sites; ++i) out[static_cast<std::size_t>(step) * sites + i] = 0.5 * spin[i];
  }
  return out;
}

double wrapped_diff(double a) { return a - std::round(a); }

// Coupled expanding circle maps theta -> f(theta + gamma * discrete Laplacian),
// f(x) = 2x + a/(2 pi) sin(2 pi x) mod 1. The read-out is theta - 1/2.
std::vector<double> cml_driving(int dim, const EnvParams& p) {
  const int B = p.box_radius;
  const std::size_t sites = window_size(dim, B);
  Xoshiro256 rng(derive_seed(p.seed, 0x636d6cULL));
  std::vector<double> theta(sites), next(sites);
  for (auto& t : theta) t = rng.uniform();
  const int nn = 2 * dim;
  const double a = p.cml_nonlinearity;
  auto f = [a](double x) {
    const double y = 2.0 * x + a / (2.0 * std::numbers::pi) * std::sin(2.0 * std::numbers::pi * x);
    return y - std::floor(y);
  };

  std::vector<double> out(static_cast<std::size_t>(p.time_extent) * sites);
  for (int step = -p.burn_in; step < p.time_extent; ++step) {
    if (step > -p.burn_in) {
      for (std::size_t i = 0; i < sites; ++i) {
        const Offset x = window_offset(dim, B, i);
        const auto nb = neighbours(dim, x);
        double lap = 0.0;
        for (int k = 0; k < nn; ++k) lap += wrapped_diff(theta[window_index(dim, B, wrap(dim, B, nb[k]))] - theta[i]);
        double y = theta[i] + p.cml_gamma / nn * lap;
        y -= std::floor(y);
        next[i] = f(y);
      }
      theta.swap(next);
    }
    if (step >= 0)
      for (std::size_t i = 0; i < sites; ++i) out[static_cast<std::size_t>(step) * sites + i] = theta[i] - 0.5;
  }
  return out;
}

}  // namespace

EnvModel parse_model(const std::string& name) {
  if (name == "iid") return EnvModel::iid;
  if (name == "markov_field") return EnvModel::markov_field;
  if (name == "cml") return EnvModel::cml;
  throw Error(ErrorCode::SchemaError, "unknown environment model '" + name + "'");
}

std::string model_name(EnvModel model) {
  switch (model) {
    case EnvModel::iid: return "iid";
    case EnvModel::markov_field: return "markov_field";
    case EnvModel::cml: return "cml";
  }
  return "iid";
}

EnvField::EnvField(Kernel base, EnvParams params, std::vector<double> perturbations)
    : base_(std::move(base)), params_(params), perturbations_(std::move(perturbations)),
      zero_row_(base_.size(), 0.0) {
  if (!perturbations_.empty() &&
      perturbations_.size() != static_cast<std::size_t>(params_.time_extent) * sites() * row_size())
    throw Error(ErrorCode::IoError, "perturbation array does not match the field extents");
}

std::span<const double> EnvField::beta_row(int t, std::size_t site) const noexcept {
  if (perturbations_.empty()) return zero_row_;
  const std::size_t r = row_size();
  return {perturbations_.data() + (static_cast<std::size_t>(t) * sites() + site) * r, r};
}

double EnvField::beta(int t, Offset u, Offset w) const noexcept {
  if (perturbations_.empty() || !in_window(dim(), row_radius(), w)) return 0.0;
  return beta_row(t, site_index(u))[window_index(dim(), row_radius(), w)];
}

std::vector<double> driving_field(const Kernel& base, const EnvParams& params) {
  switch (params.model) {
    case EnvModel::markov_field: return markov_driving(base.dim(), params);
    case EnvModel::cml: return cml_driving(base.dim(), params);
    case EnvModel::iid: break;
  }
  return {};
}

EnvField gen_environment(const Kernel& base, const EnvParams& params) {
  check_params(base, params);
  if (params.epsilon == 0.0) return EnvField(base, params, {});

  const int dim = base.dim();
  const int B = params.box_radius;
  const std::size_t sites = window_size(dim, B);
  const std::size_t row = base.size();
  const std::vector<double> drive = driving_field(base, params);
  const double sign = params.antithetic ? -1.0 : 1.0;

  std::vector<double> out(static_cast<std::size_t>(params.time_extent) * sites * row);
  std::vector<double> g(row);
  for (int t = 0; t < params.time_extent; ++t) {
    for (std::size_t s = 0; s < sites; ++s) {
      const Offset u = window_offset(dim, B, s);
      for (std::size_t w = 0; w < row; ++w) {
        if (params.model == EnvModel::iid) {
          g[w] = to_unit(derive_seed(params.seed, static_cast<std::uint64_t>(t) * sites + s, w)) - 0.5;
        } else {
          const Offset v = wrap(dim, B, u + base.offset(w));
          g[w] = drive[static_cast<std::size_t>(t) * sites + window_index(dim, B, v)];
        }
      }
      double gbar = 0.0;
      for (std::size_t w = 0; w < row; ++w) gbar += base.masses()[w] * g[w];
      double* dst = out.data() + (static_cast<std::size_t>(t) * sites + s) * row;
      for (std::size_t w = 0; w < row; ++w)
        dst[w] = sign * params.epsilon * base.masses()[w] * (g[w] - gbar);
    }
  }
  return EnvField(base, params, std::move(out));
}

MixingTable env_mixing_probe(const EnvField& prototype, int max_sep, int replicas, Offset w) {
  if (replicas < 100) throw Error(ErrorCode::InsufficientReplicas, "env_mixing_probe needs >= 100 replicas");
  const EnvParams& base_params = prototype.params();
  if (max_sep < 0 || max_sep >= base_params.time_extent)
    throw std::invalid_argument("max_sep must be below the time extent");
  if (!in_window(prototype.dim(), prototype.row_radius(), w))
    throw std::invalid_argument("displacement outside the kernel window");

  const auto R = static_cast<std::size_t>(replicas);
  const std::size_t S = static_cast<std::size_t>(max_sep) + 1;
  // Per replica and separation: sums of x, y, xy and counts.
  std::vector<double> sx(R * S), sy(R * S), sxy(R * S), cnt(R * S);
  std::vector<double> all_x;  // separation-0 samples for the direct variance
  std::vector<double> rep_x(R), rep_xx(R), rep_n(R);

  for (std::size_t r = 0; r < R; ++r) {
    EnvParams p = base_params;
    p.seed = derive_seed(base_params.seed, r);
    p.antithetic = false;
    const EnvField f = gen_environment(prototype.base(), p);
    const std::size_t wi = window_index(f.dim(), f.row_radius(), w);
    for (std::size_t site = 0; site < f.sites(); ++site) {
      for (int t = 0; t < p.time_extent; ++t) {
        const double x = f.beta_row(t, site)[wi];
        all_x.push_back(x);
        rep_x[r] += x;
        rep_xx[r] += x * x;
        rep_n[r] += 1;
        for (std::size_t s = 0; s < S && t + static_cast<int>(s) < p.time_extent; ++s) {
          const double y = f.beta_row(t + static_cast<int>(s), site)[wi];
          sx[r * S + s] += x;
          sy[r * S + s] += y;
          sxy[r * S + s] += x * y;
          cnt[r * S + s] += 1;
        }
      }
    }
  }

  MixingTable table;
  table.displacement = w;
  for (std::size_t s = 0; s < S; ++s) {
    double tx = 0, ty = 0, txy = 0, tn = 0;
    for (std::size_t r = 0; r < R; ++r) {
      tx += sx[r * S + s];
      ty += sy[r * S + s];
      txy += sxy[r * S + s];
      tn += cnt[r * S + s];
    }
    auto est = [&](long skip) {
      double a = tx, b = ty, c = txy, n = tn;
      if (skip >= 0) {
        const auto k = static_cast<std::size_t>(skip) * S + s;
        a -= sx[k];
        b -= sy[k];
        c -= sxy[k];
        n -= cnt[k];
      }
      return c / n - (a / n) * (b / n);
    };
    const auto jk = stats::jackknife(R, est);
    table.rows.push_back({static_cast<int>(s), jk.value, jk.stderr_});
  }

  {
    const double m = stats::mean(all_x);
    double ss = 0.0;
    for (double x : all_x) ss += (x - m) * (x - m);
    table.direct_variance = ss / static_cast<double>(all_x.size());
    double tx = 0, txx = 0, tn = 0;
    for (std::size_t r = 0; r < R; ++r) {
      tx += rep_x[r];
      txx += rep_xx[r];
      tn += rep_n[r];
    }
    auto est = [&](long skip) {
      double a = tx, b = txx, n = tn;
      if (skip >= 0) {
        a -= rep_x[skip];
        b -= rep_xx[skip];
        n -= rep_n[skip];
      }
      return b / n - (a / n) * (a / n);
    };
    table.direct_variance_stderr = stats::jackknife(R, est).stderr_;
  }

  bool resolved = false;
  for (const auto& row : table.rows) resolved = resolved || std::abs(row.value) > row.stderr_;
  if (!resolved && base_params.epsilon > 0.0)
    throw Error(ErrorCode::InsufficientReplicas, "no separation resolved above its standard error");

  if (base_params.model != EnvModel::iid) {
    std::vector<double> xs, ys, ws;
    for (const auto& row : table.rows) {
      if (row.value <= 2.0 * row.stderr_) break;  // stop at the first unresolved separation
      xs.push_back(row.separation);
      ys.push_back(std::log(row.value));
      const double rel = row.stderr_ / row.value;
      ws.push_back(1.0 / std::max(rel * rel, 1e-300));
    }
    if (xs.size() >= 2) {
      const auto fit = stats::linear_fit(xs, ys, ws);
      ExpFit e;
      e.rate = -fit.slope;
      e.rate_lo = e.rate - 2.0 * fit.slope_stderr;
      e.rate_hi = e.rate + 2.0 * fit.slope_stderr;
      e.r2 = fit.r2;
      e.points = static_cast<int>(xs.size());
      table.fit = e;
    }
  }
  return table;
}

void write_env(const EnvField& field, const std::string& path) {
  const auto& p = field.params();
  nlohmann::json h;
  h["format"] = "rgwalk-env";
  h["version"] = 1;
  h["model"] = model_name(p.model);
  h["epsilon"] = p.epsilon;
  h["lambda"] = p.lambda;
  h["time_extent"] = p.time_extent;
  h["box_radius"] = p.box_radius;
  h["seed"] = p.seed;
  h["coupling"] = p.coupling;
  h["cml_gamma"] = p.cml_gamma;
  h["cml_nonlinearity"] = p.cml_nonlinearity;
  h["burn_in"] = p.burn_in;
  h["antithetic"] = p.antithetic;
  h["boundary"] = "periodic";
  h["base"] = nlohmann::json::parse(kernel_to_json(field.base()));
  h["row_size"] = field.row_size();
  h["rows"] = field.deterministic() ? 0 : static_cast<std::size_t>(p.time_extent) * field.sites();
  const std::string header = h.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  out.write(kEnvMagic, sizeof kEnvMagic);
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  const auto raw = field.raw();
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

EnvField read_env(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kEnvMagic, sizeof magic) != 0)
    throw Error(ErrorCode::IoError, path + " is not an rgwalk environment file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw Error(ErrorCode::IoError, "corrupt environment header");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  try {
    const auto h = nlohmann::json::parse(header);
    if (h.at("version").get<int>() != 1) throw Error(ErrorCode::IoError, "unsupported env format version");
    EnvParams p;
    p.model = parse_model(h.at("model").get<std::string>());
    p.epsilon = h.at("epsilon").get<double>();
    p.lambda = h.at("lambda").get<double>();
    p.time_extent = h.at("time_extent").get<int>();
    p.box_radius = h.at("box_radius").get<int>();
    p.seed = h.at("seed").get<std::uint64_t>();
    p.coupling = h.at("coupling").get<double>();
    p.cml_gamma = h.at("cml_gamma").get<double>();
    p.cml_nonlinearity = h.at("cml_nonlinearity").get<double>();
    p.burn_in = h.at("burn_in").get<int>();
    p.antithetic = h.at("antithetic").get<bool>();
    Kernel base = kernel_from_json(h.at("base").dump());
    const auto rows = h.at("rows").get<std::size_t>();
    std::vector<double> data(rows * base.size());
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::IoError, "truncated environment data in " + path);
    return EnvField(std::move(base), p, std::move(data));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::IoError, std::string("malformed environment header: ") + ex.what());
  }
}

}  // namespace rgwalk
