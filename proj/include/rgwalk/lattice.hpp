#pragma once

#include <array>
#include <cstddef>
#include <cstdlib>
#include <stdexcept>

namespace rgwalk {

/// Integer lattice point or offset. Only the first `dim` components are used.
using Offset = std::array<int, 2>;

inline void check_dim(int dim) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("dimension must be 1 or 2");
}

/// Number of cells in the window |u|_inf <= radius.
constexpr std::size_t window_size(int dim, int radius) noexcept {
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  return dim == 1 ? side : side * side;
}

constexpr bool in_window(int dim, int radius, Offset o) noexcept {
  if (std::abs(o[0]) > radius) return false;
  return dim == 1 ? o[1] == 0 : std::abs(o[1]) <= radius;
}

constexpr std::size_t window_index(int dim, int radius, Offset o) noexcept {
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  const auto i0 = static_cast<std::size_t>(o[0] + radius);
  return dim == 1 ? i0 : i0 + side * static_cast<std::size_t>(o[1] + radius);
}

constexpr Offset window_offset(int dim, int radius, std::size_t index) noexcept {
  const auto side = static_cast<std::size_t>(2 * radius + 1);
  if (dim == 1) return {static_cast<int>(index) - radius, 0};
  return {static_cast<int>(index % side) - radius, static_cast<int>(index / side) - radius};
}

constexpr long norm2(Offset o) noexcept {
  return static_cast<long>(o[0]) * o[0] + static_cast<long>(o[1]) * o[1];
}

constexpr int norm_inf(Offset o) noexcept {
  const int a = o[0] < 0 ? -o[0] : o[0];
  const int b = o[1] < 0 ? -o[1] : o[1];
  return a > b ? a : b;
}

constexpr Offset operator+(Offset a, Offset b) noexcept { return {a[0] + b[0], a[1] + b[1]}; }
constexpr Offset operator-(Offset a, Offset b) noexcept { return {a[0] - b[0], a[1] - b[1]}; }
constexpr Offset operator-(Offset a) noexcept { return {-a[0], -a[1]}; }

/// Wraps a coordinate into [-radius, radius] on the periodic box of side 2*radius+1.
constexpr int wrap_coord(int x, int radius) noexcept {
  const int side = 2 * radius + 1;
  int r = (x + radius) % side;
  if (r < 0) r += side;
  return r - radius;
}

constexpr Offset wrap(int dim, int radius, Offset o) noexcept {
  return {wrap_coord(o[0], radius), dim == 1 ? 0 : wrap_coord(o[1], radius)};
}

/// Images of an offset under the hypercubic group (reflections and, in d = 2,
/// coordinate swaps). Returns the number of images written (2 or 8).
inline int hypercubic_images(int dim, Offset o, std::array<Offset, 8>& out) noexcept {
  if (dim == 1) {
    out[0] = {o[0], 0};
    out[1] = {-o[0], 0};
    return 2;
  }
  int n = 0;
  for (int swap = 0; swap < 2; ++swap) {
    const int a = swap ? o[1] : o[0];
    const int b = swap ? o[0] : o[1];
    for (int sa : {1, -1})
      for (int sb : {1, -1}) out[n++] = {sa * a, sb * b};
  }
  return n;
}

}  // namespace rgwalk
