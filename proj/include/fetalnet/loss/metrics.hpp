#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fetalnet/core/class_label.hpp"
#include "fetalnet/core/error.hpp"
#include "fetalnet/core/grid.hpp"

namespace fetalnet::metrics {

/// Pixel counts of a mask pair; iou and dice derive from the same counts.
struct Overlap {
  std::size_t intersection = 0;
  std::size_t pred_area = 0;
  std::size_t gt_area = 0;

  std::size_t union_area() const { return pred_area + gt_area - intersection; }
  // Two empty masks agree perfectly.
  double iou() const {
    const auto u = union_area();
    return u == 0 ? 1.0 : static_cast<double>(intersection) / static_cast<double>(u);
  }
  double dice() const {
    const auto s = pred_area + gt_area;
    return s == 0 ? 1.0 : 2.0 * static_cast<double>(intersection) / static_cast<double>(s);
  }
};

inline Overlap overlap(const Mask& pred, const Mask& gt) {
  if (pred.rows() != gt.rows() || pred.cols() != gt.cols()) {
    throw ContractViolation("overlap: mask sizes differ");
  }
  Overlap o;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] != 0;
    const bool g = gt.data()[i] != 0;
    o.intersection += p && g;
    o.pred_area += p;
    o.gt_area += g;
  }
  return o;
}

struct SegmentationScores {
  double iou = 1.0;
  double dice = 1.0;
  std::size_t frames = 0;
};

/// Per-frame IoU and Dice averaged over the given frames. Callers pass only
/// non-Background frames.
inline SegmentationScores segmentation_metrics(std::span<const Mask> pred,
                                               std::span<const Mask> gt) {
  if (pred.size() != gt.size()) throw ContractViolation("segmentation_metrics: count mismatch");
  SegmentationScores s;
  if (pred.empty()) return s;
  double iou = 0.0, dice = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto o = overlap(pred[i], gt[i]);
    iou += o.iou();
    dice += o.dice();
  }
  s.iou = iou / static_cast<double>(pred.size());
  s.dice = dice / static_cast<double>(pred.size());
  s.frames = pred.size();
  return s;
}

struct ClassificationScores {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Accuracy over all four classes; precision, recall and F1 macro-averaged over
/// the foreground classes that occur in either predictions or ground truth.
inline ClassificationScores classification_metrics(std::span<const ClassLabel> pred,
                                                   std::span<const ClassLabel> gt) {
  if (pred.size() != gt.size()) throw ContractViolation("classification_metrics: count mismatch");
  ClassificationScores s;
  if (pred.empty()) return s;
  std::array<std::size_t, kNumClasses> tp{}, fp{}, fn{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = index_of(pred[i]);
    const int g = index_of(gt[i]);
    if (p == g) {
      ++correct;
      ++tp[p];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());

  int classes = 0;
  for (auto label : {ClassLabel::Head, ClassLabel::Abdomen, ClassLabel::Femur}) {
    const int k = index_of(label);
    if (tp[k] + fp[k] + fn[k] == 0) continue;
    const double prec = tp[k] + fp[k] ? double(tp[k]) / double(tp[k] + fp[k]) : 0.0;
    const double rec = tp[k] + fn[k] ? double(tp[k]) / double(tp[k] + fn[k]) : 0.0;
    s.precision += prec;
    s.recall += rec;
    s.f1 += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    ++classes;
  }
  if (classes > 0) {
    s.precision /= classes;
    s.recall /= classes;
    s.f1 /= classes;
  } else {
    // Only Background present and never confused with a body part.
    s.precision = s.recall = s.f1 = 1.0;
  }
  return s;
}

inline double adf(double measured_mm, double reference_mm) {
  return std::abs(measured_mm - reference_mm);
}

/// Mean and population standard deviation of absolute differences.
struct AdfStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;
};

inline AdfStats summarize(std::span<const double> diffs) {
  AdfStats s;
  s.count = diffs.size();
  if (diffs.empty()) return s;
  for (double d : diffs) s.mean += d;
  s.mean /= static_cast<double>(diffs.size());
  for (double d : diffs) s.std += (d - s.mean) * (d - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(diffs.size()));
  return s;
}

}  // namespace fetalnet::metrics
