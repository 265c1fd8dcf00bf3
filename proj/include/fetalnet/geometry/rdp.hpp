#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "fetalnet/core/error.hpp"
#include "fetalnet/geometry/point.hpp"

namespace fetalnet::geometry {

/// Ramer-Douglas-Peucker simplification of an open polyline. Endpoints are kept and
/// every dropped point lies within `epsilon` of the segment that replaces it.
/// Inputs with fewer than 3 points are returned unchanged.
inline std::vector<Point> rdp(const std::vector<Point>& pts, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidInput("rdp: epsilon must be positive");
  if (pts.size() < 3) return pts;

  std::vector<bool> keep(pts.size(), false);
  keep.front() = keep.back() = true;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{0, pts.size() - 1}};
  while (!stack.empty()) {
    auto [first, last] = stack.back();
    stack.pop_back();
    double dmax = -1.0;
    std::size_t imax = first;
    for (std::size_t i = first + 1; i < last; ++i) {
      const double d = segment_distance(pts[i], pts[first], pts[last]);
      if (d > dmax) {
        dmax = d;
        imax = i;
      }
    }
    if (dmax > epsilon) {
      keep[imax] = true;
      stack.emplace_back(first, imax);
      stack.emplace_back(imax, last);
    }
  }

  std::vector<Point> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (keep[i]) out.push_back(pts[i]);
  }
  return out;
}

/// RDP for a closed polygon: split at the first vertex and the vertex farthest
/// from it, simplify both halves, and rejoin without repeating the split points.
inline std::vector<Point> rdp_closed(const std::vector<Point>& poly, double epsilon) {
  if (poly.size() < 3) return poly;
  std::size_t far = 0;
  double dmax = -1.0;
  for (std::size_t i = 1; i < poly.size(); ++i) {
    const double d = distance(poly[0], poly[i]);
    if (d > dmax) {
      dmax = d;
      far = i;
    }
  }
  std::vector<Point> first(poly.begin(), poly.begin() + static_cast<std::ptrdiff_t>(far) + 1);
  std::vector<Point> second(poly.begin() + static_cast<std::ptrdiff_t>(far), poly.end());
  second.push_back(poly.front());
  auto a = rdp(first, epsilon);
  auto b = rdp(second, epsilon);
  a.pop_back();
  a.insert(a.end(), b.begin(), b.end() - 1);
  return a;
}

/// Largest distance from any point of `original` to the polyline `simplified`.
inline double max_deviation(const std::vector<Point>& original, const std::vector<Point>& simplified,
                            bool closed) {
  double worst = 0.0;
  const std::size_t m = simplified.size();
  for (const auto& p : original) {
    double best = m == 1 ? distance(p, simplified[0]) : 1e300;
    const std::size_t segs = closed ? m : m - 1;
    for (std::size_t i = 0; i + 1 <= segs && m > 1; ++i) {
      best = std::min(best, segment_distance(p, simplified[i], simplified[(i + 1) % m]));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace fetalnet::geometry
