#include "rgwalk/steiner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "rgwalk/error.hpp"

namespace rgwalk {

namespace {

double dist(const Point& a, const Point& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

std::vector<Point> distinct(std::span<const Point> points) {
  std::vector<Point> out;
  for (const Point& p : points) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const Point& q) { return dist(p, q) <= 1e-12; });
    if (!dup) out.push_back(p);
  }
  return out;
}

bool collinear(const std::vector<Point>& p) {
  double span = 0.0;
  std::size_t a = 0, b = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j)
      if (dist(p[i], p[j]) > span) {
        span = dist(p[i], p[j]);
        a = i;
        b = j;
      }
  const double dx = p[b][0] - p[a][0], dy = p[b][1] - p[a][1];
  for (const Point& q : p)
    if (std::abs(dx * (q[1] - p[a][1]) - dy * (q[0] - p[a][0])) > 1e-12 * span * span) return false;
  return true;
}

double fermat3(const Point& a, const Point& b, const Point& c) {
  const double ab = dist(a, b), bc = dist(b, c), ca = dist(c, a);
  // An angle >= 120 degrees puts the Fermat point at that vertex.
  const auto obtuse = [](double opp, double s1, double s2) {
    return s1 * s1 + s2 * s2 + s1 * s2 <= opp * opp;  // cos <= -1/2
  };
  if (obtuse(bc, ab, ca)) return ab + ca;
  if (obtuse(ca, ab, bc)) return ab + bc;
  if (obtuse(ab, bc, ca)) return bc + ca;
  const double area = 0.5 * std::abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
  return std::sqrt(0.5 * (ab * ab + bc * bc + ca * ca) + 2.0 * std::sqrt(3.0) * area);
}

using Edge = std::pair<int, int>;

/// Full Steiner topologies on n terminals (ids 0..n-1) and n-2 Steiner points (ids n..2n-3).
void topologies(int n, int k, std::vector<Edge>& edges, std::vector<std::vector<Edge>>& out) {
  if (k == n) {
    out.push_back(edges);
    return;
  }
  const int s = n + k - 2;  // new Steiner point
  const std::size_t count = edges.size();
  for (std::size_t e = 0; e < count; ++e) {
    const Edge old = edges[e];
    edges[e] = {old.first, s};
    edges.push_back({s, old.second});
    edges.push_back({s, k});
    topologies(n, k + 1, edges, out);
    edges.pop_back();
    edges.pop_back();
    edges[e] = old;
  }
}

double optimize_topology(const std::vector<Point>& terminals, const std::vector<Edge>& edges) {
  const int n = static_cast<int>(terminals.size());
  const int total = 2 * n - 2;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(total));
  for (const auto& [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<Point> pos(terminals);
  pos.resize(static_cast<std::size_t>(total));
  // Start each Steiner point at the mean of its terminal neighbours (or of all terminals).
  Point centroid{0.0, 0.0};
  for (const Point& t : terminals) {
    centroid[0] += t[0] / n;
    centroid[1] += t[1] / n;
  }
  for (int s = n; s < total; ++s) {
    Point acc{0.0, 0.0};
    int cnt = 0;
    for (int nb : adj[static_cast<std::size_t>(s)])
      if (nb < n) {
        acc[0] += terminals[static_cast<std::size_t>(nb)][0];
        acc[1] += terminals[static_cast<std::size_t>(nb)][1];
        ++cnt;
      }
    pos[static_cast<std::size_t>(s)] =
        cnt ? Point{(acc[0] + centroid[0]) / (cnt + 1), (acc[1] + centroid[1]) / (cnt + 1)} : centroid;
  }
  const auto length = [&] {
    double l = 0.0;
    for (const auto& [a, b] : edges) l += dist(pos[static_cast<std::size_t>(a)], pos[static_cast<std::size_t>(b)]);
    return l;
  };
  double prev = length();
  for (int it = 0; it < 5000; ++it) {
    for (int s = n; s < total; ++s) {
      Point num{0.0, 0.0};
      double den = 0.0;
      for (int nb : adj[static_cast<std::size_t>(s)]) {
        const Point& q = pos[static_cast<std::size_t>(nb)];
        const double w = 1.0 / std::max(dist(pos[static_cast<std::size_t>(s)], q), 1e-13);
        num[0] += w * q[0];
        num[1] += w * q[1];
        den += w;
      }
      pos[static_cast<std::size_t>(s)] = {num[0] / den, num[1] / den};
    }
    const double cur = length();
    if (prev - cur <= 1e-14 * std::max(1.0, cur) && it > 10) {
      prev = cur;
      break;
    }
    prev = cur;
  }
  return prev;
}

}  // namespace

double mst_length(std::span<const Point> points) {
  const std::size_t n = points.size();
  if (n < 2) return 0.0;
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::vector<bool> in(n, false);
  best[0] = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t u = n;
    for (std::size_t i = 0; i < n; ++i)
      if (!in[i] && (u == n || best[i] < best[u])) u = i;
    in[u] = true;
    total += best[u];
    for (std::size_t i = 0; i < n; ++i)
      if (!in[i]) best[i] = std::min(best[i], dist(points[u], points[i]));
  }
  return total;
}

double steiner_length(std::span<const Point> points) {
  const std::vector<Point> p = distinct(points);
  const std::size_t n = p.size();
  if (n > 6) throw Error(ErrorCode::TooManyTerminals, std::to_string(n) + " distinct terminals; at most 6 are supported");
  if (n < 2) return 0.0;
  if (n == 2) return dist(p[0], p[1]);
  const double mst = mst_length(p);
  if (collinear(p)) return mst;
  if (n == 3) return std::min(mst, fermat3(p[0], p[1], p[2]));

  std::vector<std::vector<Edge>> tops;
  std::vector<Edge> edges{{0, static_cast<int>(n)}, {1, static_cast<int>(n)}, {2, static_cast<int>(n)}};
  topologies(static_cast<int>(n), 3, edges, tops);
  double best = mst;
  for (const auto& t : tops) best = std::min(best, optimize_topology(p, t));
  return best;
}

}  // namespace rgwalk
