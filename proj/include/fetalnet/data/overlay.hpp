#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fetalnet/data/image_io.hpp"
#include "fetalnet/geometry/measure.hpp"

namespace fetalnet::data {

struct Rgb {
  std::uint8_t r, g, b;
};

inline constexpr Rgb kTruthColor{255, 0, 0};
inline constexpr Rgb kPredictionColor{0, 255, 0};

/// Line through pixel centres, one sample per unit step along the longer axis.
inline void draw_line(RgbImage& img, geometry::Point a, geometry::Point b, Rgb c) {
  const double steps = std::max({std::abs(b.x - a.x), std::abs(b.y - a.y), 1.0});
  const int n = static_cast<int>(std::ceil(steps));
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    img.set(static_cast<int>(std::lround(a.y + t * (b.y - a.y))),
            static_cast<int>(std::lround(a.x + t * (b.x - a.x))), c.r, c.g, c.b);
  }
}

inline void draw_polygon(RgbImage& img, const std::vector<geometry::Point>& pts, Rgb c) {
  for (std::size_t i = 0; i < pts.size(); ++i) draw_line(img, pts[i], pts[(i + 1) % pts.size()], c);
}

inline std::vector<geometry::Point> ellipse_outline(const geometry::EllipseFit& e, int samples = 180) {
  std::vector<geometry::Point> pts;
  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / samples;
    const double u = e.semi_major * std::cos(t), v = e.semi_minor * std::sin(t);
    pts.push_back({e.center.x + u * ca - v * sa, e.center.y + u * sa + v * ca});
  }
  return pts;
}

inline std::vector<geometry::Point> rect_corners(const geometry::RotatedRect& r) {
  const geometry::Point d{std::cos(r.angle), std::sin(r.angle)};
  const geometry::Point n{-d.y, d.x};
  const double hl = r.long_side / 2, hs = r.short_side / 2;
  return {r.center + hl * d + hs * n, r.center - hl * d + hs * n, r.center - hl * d - hs * n,
          r.center + hl * d - hs * n};
}

/// Draws what a measurement was taken from: the contour, plus the fitted
/// ellipse or rectangle.
inline void draw_trace(RgbImage& img, const geometry::MeasureTrace& t, Rgb c) {
  if (t.contour) draw_polygon(img, t.contour->points, c);
  if (t.ellipse) draw_polygon(img, ellipse_outline(*t.ellipse), c);
  if (t.rect) draw_polygon(img, rect_corners(*t.rect), c);
}

inline void draw_mask_outline(RgbImage& img, const Mask& m, Rgb c) {
  for (const auto& contour : geometry::find_contours(m)) draw_polygon(img, contour.points, c);
}

}  // namespace fetalnet::data
