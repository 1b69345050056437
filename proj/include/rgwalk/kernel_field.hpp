#pragma once

#include <span>
#include <vector>

#include "environment.hpp"

namespace rgwalk {

/// Space-time field of transition rows q(t, u, u + w) on a periodic box, stored
/// as cell masses. Level n cells have side scale_base^-n; the box keeps its
/// site count across levels (cell u at level n sits at u / scale_base^n).
/// Rows may be stored for a subset of source cells only.
struct KernelField {
  int dim = 1;
  int box_radius = 1;
  int time_extent = 1;
  int row_radius = 0;
  int level = 0;
  int scale_base = 2;
  std::vector<Offset> sources;  // wrapped source cells with stored rows
  std::vector<double> rows;     // [t][source][w]

  [[nodiscard]] std::size_t row_size() const noexcept { return window_size(dim, row_radius); }
  [[nodiscard]] double scale() const noexcept;
  [[nodiscard]] std::span<const double> row(int t, std::size_t source) const noexcept {
    const std::size_t r = row_size();
    return {rows.data() + (static_cast<std::size_t>(t) * sources.size() + source) * r, r};
  }
  [[nodiscard]] std::span<double> row(int t, std::size_t source) noexcept {
    const std::size_t r = row_size();
    return {rows.data() + (static_cast<std::size_t>(t) * sources.size() + source) * r, r};
  }
  /// True when every site of the box has a row, in window_index order.
  [[nodiscard]] bool full() const noexcept { return sources.size() == window_size(dim, box_radius); }
  [[nodiscard]] std::size_t site_index(Offset site) const noexcept {
    return window_index(dim, box_radius, wrap(dim, box_radius, site));
  }
};

/// All sites of the box in window_index order.
std::vector<Offset> all_sites(int dim, int box_radius);

/// p(t, u, u + w) = T(w) + b(t, u, u + w) for every site.
KernelField transition_field(const EnvField& env);
/// b(t, u, u + w) for every site.
KernelField perturbation_field(const EnvField& env);

/// Distribution of a walk started at `source` at time t0 after `steps` steps of
/// a full field, as masses over offsets |w|_inf <= steps * row_radius. Throws
/// BoundaryContamination if the window would wrap around the box.
std::vector<double> propagate(const KernelField& field, int t0, Offset source, int steps);

/// Same propagation read directly from an environment, one step at a time as
/// T(w) + b(t, u, u + w); used as an independent path for identity checks.
std::vector<double> propagate_env(const EnvField& env, int t0, Offset source, int steps);

}  // namespace rgwalk
