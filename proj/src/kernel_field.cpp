#include "rgwalk/kernel_field.hpp"

#include <cmath>

#include "rgwalk/error.hpp"

namespace rgwalk {

namespace {

void check_window(int dim, int radius, int box_radius) {
  (void)dim;
  if (radius > box_radius)
    throw Error(ErrorCode::BoundaryContamination,
                "walk window of radius " + std::to_string(radius) + " wraps the periodic box of radius " +
                    std::to_string(box_radius));
}

KernelField field_from_env(const EnvField& env, bool include_base) {
  KernelField f;
  f.dim = env.dim();
  f.box_radius = env.box_radius();
  f.time_extent = env.time_extent();
  f.row_radius = env.row_radius();
  f.level = env.base().level();
  f.scale_base = env.base().scale_base();
  f.sources = all_sites(f.dim, f.box_radius);
  const std::size_t r = f.row_size();
  f.rows.resize(static_cast<std::size_t>(f.time_extent) * f.sources.size() * r);
  const auto base = env.base().masses();
  for (int t = 0; t < f.time_extent; ++t)
    for (std::size_t s = 0; s < f.sources.size(); ++s) {
      const auto b = env.beta_row(t, s);
      auto dst = f.row(t, s);
      for (std::size_t w = 0; w < r; ++w) dst[w] = (include_base ? base[w] : 0.0) + b[w];
    }
  return f;
}

}  // namespace

double KernelField::scale() const noexcept { return std::pow(static_cast<double>(scale_base), level); }

std::vector<Offset> all_sites(int dim, int box_radius) {
  std::vector<Offset> s(window_size(dim, box_radius));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = window_offset(dim, box_radius, i);
  return s;
}

KernelField transition_field(const EnvField& env) { return field_from_env(env, true); }

KernelField perturbation_field(const EnvField& env) { return field_from_env(env, false); }

std::vector<double> propagate(const KernelField& field, int t0, Offset source, int steps) {
  if (!field.full()) throw std::invalid_argument("propagate needs rows for every site");
  if (t0 < 0 || t0 + steps > field.time_extent) throw std::invalid_argument("propagation leaves the time box");
  const int dim = field.dim;
  const int rr = field.row_radius;
  check_window(dim, steps * rr, field.box_radius);

  std::vector<double> cur{1.0}, next;
  int radius = 0;
  for (int s = 0; s < steps; ++s) {
    const int nr = radius + rr;
    next.assign(window_size(dim, nr), 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double m = cur[i];
      if (m == 0.0) continue;
      const Offset x = window_offset(dim, radius, i);
      const auto row = field.row(t0 + s, field.site_index(source + x));
      for (std::size_t w = 0; w < row.size(); ++w)
        next[window_index(dim, nr, x + window_offset(dim, rr, w))] += m * row[w];
    }
    cur.swap(next);
    radius = nr;
  }
  return cur;
}

std::vector<double> propagate_env(const EnvField& env, int t0, Offset source, int steps) {
  if (t0 < 0 || t0 + steps > env.time_extent()) throw std::invalid_argument("propagation leaves the time box");
  const int dim = env.dim();
  const int rr = env.row_radius();
  check_window(dim, steps * rr, env.box_radius());
  const Kernel& base = env.base();

  std::vector<double> cur{1.0}, next;
  int radius = 0;
  for (int s = 0; s < steps; ++s) {
    const int nr = radius + rr;
    next.assign(window_size(dim, nr), 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double m = cur[i];
      if (m == 0.0) continue;
      const Offset x = window_offset(dim, radius, i);
      for (std::size_t w = 0; w < base.size(); ++w) {
        const Offset off = base.offset(w);
        next[window_index(dim, nr, x + off)] += m * env.p(t0 + s, source + x, off);
      }
    }
    cur.swap(next);
    radius = nr;
  }
  return cur;
}

}  // namespace rgwalk
