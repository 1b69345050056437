#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rgwalk/rng.hpp"
#include "rgwalk/steiner.hpp"

using namespace rgwalk;

namespace {

// Oracle for three terminals: brute-force minimization of the star length over a shrinking grid.
double star_minimum(const std::vector<Point>& p) {
  double cx = 0, cy = 0, h = 10.0;
  auto len = [&](double x, double y) {
    double s = 0;
    for (const auto& q : p) s += std::hypot(q[0] - x, q[1] - y);
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    double best = len(cx, cy), bx = cx, by = cy;
    for (int i = -2; i <= 2; ++i)
      for (int j = -2; j <= 2; ++j)
        if (const double v = len(cx + i * h, cy + j * h); v < best) {
          best = v;
          bx = cx + i * h;
          by = cy + j * h;
        }
    cx = bx;
    cy = by;
    h *= 0.7;
  }
  return len(cx, cy);
}

}  // namespace

TEST_CASE("closed forms") {
  CHECK(steiner_length(std::vector<Point>{{0, 0}, {3, 4}}) == doctest::Approx(5.0));
  CHECK(steiner_length(std::vector<Point>{{1, 2}}) == 0.0);
  CHECK(steiner_length(std::vector<Point>{}) == 0.0);
  CHECK(steiner_length(std::vector<Point>{{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}}) ==
        doctest::Approx(std::sqrt(3.0)).epsilon(1e-9));
  // Obtuse triangle (angle > 120 degrees): the tree is the two short sides.
  CHECK(steiner_length(std::vector<Point>{{-1, 0}, {1, 0}, {0, 0.1}}) == doctest::Approx(2 * std::hypot(1.0, 0.1)));
  // Unit square: 1 + sqrt(3).
  CHECK(steiner_length(std::vector<Point>{{0, 0}, {1, 0}, {1, 1}, {0, 1}}) == doctest::Approx(1 + std::sqrt(3.0)));
  // Collinear points and duplicates.
  CHECK(steiner_length(std::vector<Point>{{0, 0}, {2, 0}, {5, 0}, {2, 0}}) == doctest::Approx(5.0));
}

TEST_CASE("three terminals against numeric minimization") {
  Xoshiro256 rng(17);
  for (int i = 0; i < 50; ++i) {
    std::vector<Point> p(3);
    for (auto& q : p) q = {4 * rng.uniform(), 4 * rng.uniform()};
    const double star = star_minimum(p);
    const double mst = mst_length(p);
    CHECK(steiner_length(p) == doctest::Approx(std::min(star, mst)).epsilon(1e-7));
  }
}

TEST_CASE("ratio bounds and invariances") {
  Xoshiro256 rng(18);
  for (int i = 0; i < 300; ++i) {
    const int n = 2 + static_cast<int>(rng() % 5);
    std::vector<Point> p(static_cast<std::size_t>(n));
    for (auto& q : p) q = {rng.uniform(), rng.uniform()};
    const double s = steiner_length(p), mst = mst_length(p);
    CHECK(s <= mst + 1e-12);
    CHECK(s >= std::sqrt(3.0) / 2 * mst - 1e-12);
    // Rotation, translation and scaling covariance.
    std::vector<Point> r = p;
    for (auto& q : r) q = {3 * (0.6 * q[0] - 0.8 * q[1]) + 7, 3 * (0.8 * q[0] + 0.6 * q[1]) - 2};
    CHECK(steiner_length(r) == doctest::Approx(3 * s).epsilon(1e-7));
    // Adding a terminal never shortens the tree.
    std::vector<Point> more = p;
    if (n < 6) {
      more.push_back({rng.uniform(), rng.uniform()});
      CHECK(steiner_length(more) >= s - 1e-9);
    }
  }
}

TEST_CASE("too many terminals") {
  std::vector<Point> p;
  for (int i = 0; i < 7; ++i) p.push_back({static_cast<double>(i), static_cast<double>(i * i)});
  CHECK(code_of([&] { steiner_length(p); }) == ErrorCode::TooManyTerminals);
}
