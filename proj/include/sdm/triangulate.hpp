#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sdm/error.hpp"

namespace sdm {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

namespace detail {

inline double cross2(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline double ring_signed_area(const std::vector<Point2>& pts, const std::vector<int>& ring) {
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const auto& p = pts[static_cast<std::size_t>(ring[i])];
    const auto& q = pts[static_cast<std::size_t>(ring[(i + 1) % ring.size()])];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

inline bool in_triangle_inclusive(const Point2& p, const Point2& a, const Point2& b, const Point2& c, double eps) {
  const double d1 = cross2(a, b, p);
  const double d2 = cross2(b, c, p);
  const double d3 = cross2(c, a, p);
  return d1 >= -eps && d2 >= -eps && d3 >= -eps;
}

/// Splices `hole` into `poly` through a mutually visible vertex pair.
inline void bridge_hole(const std::vector<Point2>& pts, std::vector<int>& poly, const std::vector<int>& hole,
                        double eps) {
  std::size_t m_pos = 0;
  for (std::size_t i = 1; i < hole.size(); ++i) {
    const auto& cur = pts[static_cast<std::size_t>(hole[i])];
    const auto& best = pts[static_cast<std::size_t>(hole[m_pos])];
    if (cur.x > best.x || (cur.x == best.x && cur.y < best.y)) m_pos = i;
  }
  const Point2 m = pts[static_cast<std::size_t>(hole[m_pos])];

  // Cast a ray in +x and find the closest polygon edge it hits.
  double best_x = std::numeric_limits<double>::infinity();
  std::ptrdiff_t bridge = -1;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = pts[static_cast<std::size_t>(poly[i])];
    const auto& b = pts[static_cast<std::size_t>(poly[(i + 1) % n])];
    if (a.y == b.y) {
      if (a.y == m.y) {
        const std::size_t pick = a.x <= b.x ? i : (i + 1) % n;
        const double x = std::min(a.x, b.x);
        if (x >= m.x && x < best_x) {
          best_x = x;
          bridge = static_cast<std::ptrdiff_t>(pick);
        }
      }
      continue;
    }
    if ((a.y - m.y) * (b.y - m.y) > 0.0) continue;
    const double x = a.x + (m.y - a.y) * (b.x - a.x) / (b.y - a.y);
    if (x < m.x - eps || x >= best_x) continue;
    best_x = x;
    if (a.y == m.y) {
      bridge = static_cast<std::ptrdiff_t>(i);
    } else if (b.y == m.y) {
      bridge = static_cast<std::ptrdiff_t>((i + 1) % n);
    } else {
      bridge = static_cast<std::ptrdiff_t>(a.x >= b.x ? i : (i + 1) % n);
    }
  }
  if (bridge < 0) throw GeometryError("triangulation: hole is not inside the outer loop");

  const Point2 hit{best_x, m.y};
  const Point2 p = pts[static_cast<std::size_t>(poly[static_cast<std::size_t>(bridge)])];
  if (!(p == hit)) {
    // A reflex vertex inside (m, hit, p) would block visibility; take the one
    // closest in angle to the ray.
    double best_angle = std::numeric_limits<double>::infinity();
    double best_dist = std::numeric_limits<double>::infinity();
    Point2 a = m;
    Point2 b = hit;
    Point2 c = p;
    if (cross2(a, b, c) < 0.0) std::swap(b, c);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& prev = pts[static_cast<std::size_t>(poly[(i + n - 1) % n])];
      const auto& cur = pts[static_cast<std::size_t>(poly[i])];
      const auto& next = pts[static_cast<std::size_t>(poly[(i + 1) % n])];
      if (cross2(prev, cur, next) > 0.0) continue;  // convex
      if (cur == p) continue;
      if (!in_triangle_inclusive(cur, a, b, c, eps)) continue;
      const double dx = cur.x - m.x;
      const double dy = cur.y - m.y;
      const double dist = std::hypot(dx, dy);
      if (dist == 0.0) continue;
      const double angle = std::abs(std::atan2(dy, dx));
      if (angle < best_angle - 1e-15 || (std::abs(angle - best_angle) <= 1e-15 && dist < best_dist)) {
        best_angle = angle;
        best_dist = dist;
        bridge = static_cast<std::ptrdiff_t>(i);
      }
    }
  }

  // When the bridge vertex occurs more than once (earlier bridges), use the
  // copy whose interior wedge contains the direction towards the hole.
  const Point2 target = pts[static_cast<std::size_t>(poly[static_cast<std::size_t>(bridge)])];
  for (std::size_t i = 0; i < n; ++i) {
    if (!(pts[static_cast<std::size_t>(poly[i])] == target)) continue;
    const auto& prev = pts[static_cast<std::size_t>(poly[(i + n - 1) % n])];
    const auto& next = pts[static_cast<std::size_t>(poly[(i + 1) % n])];
    const bool convex = cross2(prev, target, next) >= 0.0;
    const bool left_of_in = cross2(prev, target, m) >= 0.0;
    const bool left_of_out = cross2(target, next, m) >= 0.0;
    const bool inside = convex ? (left_of_in && left_of_out) : (left_of_in || left_of_out);
    if (inside) {
      bridge = static_cast<std::ptrdiff_t>(i);
      break;
    }
  }

  std::vector<int> merged;
  merged.reserve(poly.size() + hole.size() + 2);
  const auto b = static_cast<std::size_t>(bridge);
  merged.insert(merged.end(), poly.begin(), poly.begin() + static_cast<std::ptrdiff_t>(b) + 1);
  for (std::size_t k = 0; k <= hole.size(); ++k) merged.push_back(hole[(m_pos + k) % hole.size()]);
  merged.push_back(poly[b]);
  merged.insert(merged.end(), poly.begin() + static_cast<std::ptrdiff_t>(b) + 1, poly.end());
  poly = std::move(merged);
}

}  // namespace detail

/// Ear-clipping triangulation of a planar polygon with holes.
/// `rings[0]` is the outer boundary, the rest are holes; orientation of the
/// input is irrelevant. Returns counter-clockwise triangles as indices into
/// the rings concatenated in order. Every ring edge appears as a triangle edge.
inline std::vector<std::array<int, 3>> triangulate_polygon(const std::vector<std::vector<Point2>>& rings) {
  if (rings.empty() || rings[0].size() < 3) throw GeometryError("triangulation: outer ring needs 3 vertices");
  std::vector<Point2> pts;
  std::vector<std::vector<int>> idx;
  for (const auto& ring : rings) {
    std::vector<int> r(ring.size());
    for (std::size_t i = 0; i < ring.size(); ++i) {
      r[i] = static_cast<int>(pts.size());
      pts.push_back(ring[i]);
    }
    idx.push_back(std::move(r));
  }
  double span = 0.0;
  {
    double x0 = pts[0].x, x1 = pts[0].x, y0 = pts[0].y, y1 = pts[0].y;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    span = std::max(x1 - x0, y1 - y0);
  }
  const double eps = 1e-12 * span;
  const double area_eps = 1e-12 * span * span;

  std::vector<int> poly = idx[0];
  if (detail::ring_signed_area(pts, poly) < 0.0) std::reverse(poly.begin(), poly.end());
  std::vector<std::vector<int>> holes(idx.begin() + 1, idx.end());
  for (auto& h : holes) {
    if (h.size() < 3) throw GeometryError("triangulation: hole needs 3 vertices");
    if (detail::ring_signed_area(pts, h) > 0.0) std::reverse(h.begin(), h.end());
  }
  auto max_x = [&](const std::vector<int>& h) {
    double m = -std::numeric_limits<double>::infinity();
    for (int i : h) m = std::max(m, pts[static_cast<std::size_t>(i)].x);
    return m;
  };
  std::stable_sort(holes.begin(), holes.end(),
                   [&](const std::vector<int>& a, const std::vector<int>& b) { return max_x(a) > max_x(b); });
  for (const auto& h : holes) detail::bridge_hole(pts, poly, h, eps);

  std::vector<std::array<int, 3>> tris;
  std::vector<int> ring = poly;
  auto ear_ok = [&](std::size_t i, bool strict) {
    const std::size_t n = ring.size();
    const int ia = ring[(i + n - 1) % n];
    const int ib = ring[i];
    const int ic = ring[(i + 1) % n];
    const auto& a = pts[static_cast<std::size_t>(ia)];
    const auto& b = pts[static_cast<std::size_t>(ib)];
    const auto& c = pts[static_cast<std::size_t>(ic)];
    if (detail::cross2(a, b, c) <= area_eps) return false;
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i || k == (i + n - 1) % n || k == (i + 1) % n) continue;
      const auto& p = pts[static_cast<std::size_t>(ring[k])];
      if (p == a || p == b || p == c) continue;
      if (strict) {
        if (detail::cross2(a, b, p) > eps && detail::cross2(b, c, p) > eps && detail::cross2(c, a, p) > eps)
          return false;
      } else if (detail::in_triangle_inclusive(p, a, b, c, eps)) {
        return false;
      }
    }
    return true;
  };
  while (ring.size() > 3) {
    const std::size_t n = ring.size();
    std::ptrdiff_t pick = -1;
    for (std::size_t i = 0; i < n && pick < 0; ++i)
      if (ear_ok(i, false)) pick = static_cast<std::ptrdiff_t>(i);
    for (std::size_t i = 0; i < n && pick < 0; ++i)
      if (ear_ok(i, true)) pick = static_cast<std::ptrdiff_t>(i);
    if (pick < 0) {
      // Only collinear or numerically flat corners remain.
      for (std::size_t i = 0; i < n && pick < 0; ++i) {
        const auto& a = pts[static_cast<std::size_t>(ring[(i + n - 1) % n])];
        const auto& b = pts[static_cast<std::size_t>(ring[i])];
        const auto& c = pts[static_cast<std::size_t>(ring[(i + 1) % n])];
        if (std::abs(detail::cross2(a, b, c)) <= area_eps) pick = static_cast<std::ptrdiff_t>(i);
      }
      if (pick < 0) throw GeometryError("triangulation failed: no ear found");
      ring.erase(ring.begin() + pick);
      continue;
    }
    const auto i = static_cast<std::size_t>(pick);
    tris.push_back({ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]});
    ring.erase(ring.begin() + pick);
  }
  if (detail::cross2(pts[static_cast<std::size_t>(ring[0])], pts[static_cast<std::size_t>(ring[1])],
                     pts[static_cast<std::size_t>(ring[2])]) > area_eps)
    tris.push_back({ring[0], ring[1], ring[2]});
  return tris;
}

}  // namespace sdm
