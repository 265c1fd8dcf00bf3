#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fetalnet/core/class_label.hpp"
#include "fetalnet/core/error.hpp"
#include "fetalnet/core/grid.hpp"
#include "fetalnet/core/resample.hpp"
#include "fetalnet/geometry/contours.hpp"
#include "fetalnet/geometry/ellipse.hpp"
#include "fetalnet/geometry/morphology.hpp"
#include "fetalnet/geometry/rdp.hpp"
#include "fetalnet/geometry/rotated_rect.hpp"

namespace fetalnet::geometry {

/// Binary segmentation at image resolution with its isotropic pixel spacing.
struct BinaryMask {
  Mask data;
  double pixel_spacing = 1.0;  // mm per pixel
};

struct PostprocessOptions {
  double threshold = 0.6;
  int structuring_size = 5;
  int median_size = 5;
};

/// Probability map -> cleaned binary mask: bilinear resize, threshold, opening
/// with a cross element, median blur, re-binarisation.
inline Mask postprocess(const Image& prob, int out_rows, int out_cols,
                        const PostprocessOptions& opt = {}) {
  const Image resized = resize_bilinear(prob, out_rows, out_cols);
  const auto se = cross_element(opt.structuring_size);
  Mask m = open(threshold(resized, opt.threshold), se);
  // median_blur already yields {0,1}; that is the re-binarisation at 0.5.
  return median_blur(m, opt.median_size);
}

struct MeasureOptions {
  /// RDP tolerance as a fraction of the contour's arc length.
  double rdp_fraction = 0.005;
  /// Half-width (in contour points) of the moving average applied to the
  /// contour before simplification; 0 disables it.
  int contour_smoothing = 3;
};

/// Circular moving average over a closed polygon.
inline std::vector<Point> smooth_closed(const std::vector<Point>& pts, int half) {
  const int n = static_cast<int>(pts.size());
  if (half <= 0 || n < 2 * half + 1) return pts;
  std::vector<Point> out(pts.size());
  const double w = 1.0 / (2 * half + 1);
  for (int i = 0; i < n; ++i) {
    Point s{0.0, 0.0};
    for (int k = -half; k <= half; ++k) s = s + pts[static_cast<std::size_t>(((i + k) % n + n) % n)];
    out[static_cast<std::size_t>(i)] = w * s;
  }
  return out;
}

/// Clinical measurements for one frame. Values are millimetres.
struct BiometryResult {
  ClassLabel label = ClassLabel::Background;
  std::optional<double> hc_mm;
  std::optional<double> bpd_mm;
  std::optional<double> ac_mm;
  std::optional<double> fl_mm;
  /// Machine-readable reason when a measurement was expected but is absent.
  std::string reason;

  bool has_any() const { return hc_mm || bpd_mm || ac_mm || fl_mm; }
};

/// Geometry intermediates kept for overlays.
struct MeasureTrace {
  std::optional<Contour> contour;
  std::optional<EllipseFit> ellipse;
  std::optional<RotatedRect> rect;
};

inline BiometryResult measure(ClassLabel label, const BinaryMask& mask,
                              const MeasureOptions& opt = {}, MeasureTrace* trace = nullptr) {
  if (!(mask.pixel_spacing > 0.0)) throw InvalidInput("pixel spacing must be positive");
  BiometryResult r;
  r.label = label;
  if (label == ClassLabel::Background) return r;

  auto contours = find_contours(mask.data);
  if (contours.empty()) {
    r.reason = "empty_mask";
    return r;
  }
  const Contour& largest = contours.front();
  if (trace) trace->contour = largest;
  const double s = mask.pixel_spacing;

  if (label == ClassLabel::Femur) {
    const RotatedRect rect = min_area_rect(largest.points);
    if (trace) trace->rect = rect;
    r.fl_mm = rect.long_side * s;
    return r;
  }

  // RDP keeps the points furthest from its chords, which on a raw pixel
  // staircase are the outermost steps; smoothing first removes that bias.
  const auto smoothed = smooth_closed(largest.points, opt.contour_smoothing);
  const double eps = opt.rdp_fraction * polyline_length(smoothed, true);
  const auto simplified = eps > 0.0 ? rdp_closed(smoothed, eps) : smoothed;
  try {
    const EllipseFit e = fit_ellipse(simplified.size() >= 5 ? simplified : smoothed);
    if (trace) trace->ellipse = e;
    const double perimeter = ellipse_perimeter(e.semi_major, e.semi_minor) * s;
    if (label == ClassLabel::Head) {
      r.hc_mm = perimeter;
      r.bpd_mm = 2.0 * e.semi_minor * s;
    } else {
      r.ac_mm = perimeter;
    }
  } catch (const FitFailure&) {
    r.reason = "fit_failure";
  }
  return r;
}

}  // namespace fetalnet::geometry
