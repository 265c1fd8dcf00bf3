#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <deque>
#include <vector>

#include "fetalnet/core/grid.hpp"
#include "fetalnet/geometry/point.hpp"

namespace fetalnet::geometry {

/// Closed outer boundary of one 8-connected foreground component.
///
/// Vertices are the midpoints of the pixel edges separating the component from
/// the background, traversed clockwise on screen (x right, y down). They lie on
/// the half-pixel boundary of the rasterised region, so the polygon is an
/// unbiased outline of the shape rather than a ring of boundary pixel centres.
struct Contour {
  std::vector<Point> points;
  /// Pixels enclosed by the outer boundary, holes included.
  std::size_t pixel_area = 0;
};

namespace detail {

// Direction order: E, S, W, N (y grows downwards).
inline constexpr std::array<int, 4> kDx = {1, 0, -1, 0};
inline constexpr std::array<int, 4> kDy = {0, 1, 0, -1};

inline bool fg(const Grid<int>& labels, int id, int x, int y) {
  return labels.contains(y, x) && labels(y, x) == id;
}

/// Walks the outer crack boundary of component `id`, whose first pixel in
/// raster order is (x0, y0). Corner (cx, cy) is the top-left corner of pixel (cx, cy).
inline std::vector<Point> trace_outer(const Grid<int>& labels, int id, int x0, int y0) {
  std::vector<Point> pts;
  int cx = x0;
  int cy = y0;
  int dir = 0;
  const int start_x = cx;
  const int start_y = cy;
  do {
    pts.push_back({cx + 0.5 * kDx[dir] - 0.5, cy + 0.5 * kDy[dir] - 0.5});
    cx += kDx[dir];
    cy += kDy[dir];
    // Pixels touching the corner, indexed NW, NE, SW, SE.
    const std::array<bool, 4> around = {fg(labels, id, cx - 1, cy - 1), fg(labels, id, cx, cy - 1),
                                        fg(labels, id, cx - 1, cy), fg(labels, id, cx, cy)};
    // (ahead-left, ahead-right) for each heading; foreground stays on the right.
    static constexpr std::array<std::array<int, 2>, 4> kAhead = {{{1, 3}, {3, 2}, {2, 0}, {0, 1}}};
    const bool ahead_left = around[kAhead[dir][0]];
    const bool ahead_right = around[kAhead[dir][1]];
    if (ahead_left) {
      dir = (dir + 3) % 4;  // 8-connectivity: diagonal neighbour joins the component
    } else if (!ahead_right) {
      dir = (dir + 1) % 4;
    }
  } while (!(cx == start_x && cy == start_y && dir == 0));
  return pts;
}

inline std::size_t enclosed_area(const Grid<int>& labels, int id, int x_min, int y_min, int x_max,
                                 int y_max) {
  // Flood the complement (4-connected) from a one-pixel frame around the bounding box.
  const int w = x_max - x_min + 3;
  const int h = y_max - y_min + 3;
  Grid<std::uint8_t> outside(h, w, 0);
  std::deque<std::pair<int, int>> queue{{0, 0}};
  outside(0, 0) = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    auto [y, x] = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      const int ny = y + kDy[d];
      const int nx = x + kDx[d];
      if (!outside.contains(ny, nx) || outside(ny, nx)) continue;
      if (fg(labels, id, nx + x_min - 1, ny + y_min - 1)) continue;
      outside(ny, nx) = 1;
      ++reached;
      queue.emplace_back(ny, nx);
    }
  }
  return static_cast<std::size_t>(w) * h - reached;
}

}  // namespace detail

/// Outer boundaries of the 8-connected foreground components of `mask`,
/// ordered by enclosed area, largest first.
inline std::vector<Contour> find_contours(const Mask& mask) {
  Grid<int> labels(mask.rows(), mask.cols(), 0);
  struct Component {
    int id, x0, y0, x_min, y_min, x_max, y_max;
  };
  std::vector<Component> comps;
  int next_id = 0;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < mask.rows(); ++y) {
    for (int x = 0; x < mask.cols(); ++x) {
      if (!mask(y, x) || labels(y, x)) continue;
      Component c{++next_id, x, y, x, y, x, y};
      labels(y, x) = c.id;
      stack.assign(1, {y, x});
      while (!stack.empty()) {
        auto [cy, cx] = stack.back();
        stack.pop_back();
        c.x_min = std::min(c.x_min, cx);
        c.x_max = std::max(c.x_max, cx);
        c.y_min = std::min(c.y_min, cy);
        c.y_max = std::max(c.y_max, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy;
            const int nx = cx + dx;
            if (mask.contains(ny, nx) && mask(ny, nx) && !labels(ny, nx)) {
              labels(ny, nx) = c.id;
              stack.emplace_back(ny, nx);
            }
          }
        }
      }
      comps.push_back(c);
    }
  }

  std::vector<Contour> out;
  out.reserve(comps.size());
  for (const auto& c : comps) {
    Contour contour;
    contour.points = detail::trace_outer(labels, c.id, c.x0, c.y0);
    contour.pixel_area = detail::enclosed_area(labels, c.id, c.x_min, c.y_min, c.x_max, c.y_max);
    out.push_back(std::move(contour));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Contour& a, const Contour& b) { return a.pixel_area > b.pixel_area; });
  return out;
}

}  // namespace fetalnet::geometry
