#pragma once

#include <array>
#include <span>

namespace rgwalk {

using Point = std::array<double, 2>;

/// Euclidean minimum spanning tree length (Prim).
double mst_length(std::span<const Point> points);

/// Euclidean Steiner tree length with Steiner points anywhere in the plane.
/// Exact closed form for up to 3 distinct points; for 4..6 the minimum over
/// every full topology, each optimized by Weiszfeld-type iteration, capped by
/// the MST. Duplicate points are merged first. Throws TooManyTerminals for
/// more than 6 distinct points.
double steiner_length(std::span<const Point> points);

}  // namespace rgwalk
