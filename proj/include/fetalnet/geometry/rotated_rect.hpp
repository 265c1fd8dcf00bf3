#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fetalnet/geometry/point.hpp"

namespace fetalnet::geometry {

struct RotatedRect {
  Point center;
  double long_side = 0.0;
  double short_side = 0.0;
  /// Direction of the long side, in [0, pi).
  double angle = 0.0;
};

/// Andrew's monotone chain; counter-clockwise in x-right/y-up axes, no collinear points.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(),
            [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], pts[i] - hull[k - 2]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

namespace detail {

inline double normalize_angle(double theta) {
  theta = std::fmod(theta, std::numbers::pi);
  if (theta < 0.0) theta += std::numbers::pi;
  if (theta >= std::numbers::pi) theta -= std::numbers::pi;
  return theta;
}

}  // namespace detail

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
/// Fewer than three distinct points give a degenerate rectangle with short side 0.
inline RotatedRect min_area_rect(const std::vector<Point>& pts) {
  const auto hull = convex_hull(pts);
  if (hull.empty()) return {};
  if (hull.size() == 1) return {hull[0], 0.0, 0.0, 0.0};
  if (hull.size() == 2) {
    const Point d = hull[1] - hull[0];
    return {0.5 * (hull[0] + hull[1]), norm(d), 0.0,
            detail::normalize_angle(std::atan2(d.y, d.x))};
  }

  const std::size_t n = hull.size();
  auto at = [&](std::size_t i) { return hull[i % n]; };
  // Calipers: farthest along the edge, farthest from it, and farthest behind it.
  std::size_t right = 0, top = 0, left = 0;
  double best_area = 1e300;
  RotatedRect best;
  for (std::size_t i = 0; i < n; ++i) {
    const Point e = at(i + 1) - at(i);
    const Point u = (1.0 / norm(e)) * e;
    const Point v{-u.y, u.x};
    auto along = [&](std::size_t j) { return dot(at(j) - at(i), u); };
    auto across = [&](std::size_t j) { return dot(at(j) - at(i), v); };
    if (i == 0) {
      for (std::size_t j = 1; j < n; ++j) {
        if (along(j) > along(right)) right = j;
        if (across(j) > across(top)) top = j;
        if (along(j) < along(left)) left = j;
      }
    }
    while (along(right + 1) > along(right) + 1e-12) ++right;
    while (across(top + 1) > across(top) + 1e-12) ++top;
    while (along(left + 1) < along(left) - 1e-12) ++left;

    const double max_u = along(right);
    const double min_u = along(left);
    const double max_v = across(top);
    const double width = max_u - min_u;
    const double height = max_v;
    const double area = width * height;
    if (area < best_area) {
      best_area = area;
      const Point c = at(i) + (0.5 * (max_u + min_u)) * u + (0.5 * max_v) * v;
      if (width >= height) {
        best = {c, width, height, detail::normalize_angle(std::atan2(u.y, u.x))};
      } else {
        best = {c, height, width, detail::normalize_angle(std::atan2(v.y, v.x))};
      }
    }
  }
  return best;
}

}  // namespace fetalnet::geometry
