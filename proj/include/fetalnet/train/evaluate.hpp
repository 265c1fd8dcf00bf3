#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "fetalnet/geometry/measure.hpp"
#include "fetalnet/loss/report.hpp"
#include "fetalnet/model/fetalnet.hpp"
#include "fetalnet/train/dataset.hpp"

namespace fetalnet::train {

/// Probability above which a network-resolution pixel counts as foreground
/// for the overlap metrics.
inline constexpr double kMetricThreshold = 0.5;

struct FrameRecord {
  std::string clip_id;
  int frame = 0;  // index within the manifest clip
  ClassLabel truth = ClassLabel::Background;
  ClassLabel predicted = ClassLabel::Background;
  geometry::BiometryResult measured;
  geometry::BiometryResult reference;
};

struct Evaluation {
  metrics::MetricReport report;
  std::vector<FrameRecord> frames;
};

inline Mask binarize(const Image& p, double threshold = kMetricThreshold) {
  Mask m(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.size(); ++i) m.data()[i] = p.data()[i] >= threshold ? 1 : 0;
  return m;
}

/// Measurement of one predicted frame at the original image resolution.
inline geometry::BiometryResult measure_prediction(const Image& seg_prob, ClassLabel label,
                                                   const data::FrameGeometry& g, double spacing) {
  const Image full = data::to_original(seg_prob, g);
  return geometry::measure(label, {geometry::postprocess(full, g.orig_rows, g.orig_cols), spacing});
}

/// Scores predictions (one vector per window, T frames each). Without a
/// classifier the class metrics are NaN and measurements use the true label.
inline Evaluation evaluate_predictions(const ClipSet& set,
                                       const std::vector<std::vector<FramePrediction>>& preds,
                                       bool has_classifier) {
  if (preds.size() != set.windows.size()) throw ContractViolation("evaluate: one prediction set per window");
  Evaluation ev;
  std::vector<Mask> seg_pred, seg_gt;
  std::vector<ClassLabel> cls_pred, cls_gt;
  std::vector<double> d_hc, d_bpd, d_ac, d_fl;
  auto add = [](std::vector<double>& out, const std::optional<double>& m, const std::optional<double>& r) {
    if (m && r) out.push_back(metrics::adf(*m, *r));
  };
  for (std::size_t w = 0; w < set.windows.size(); ++w) {
    const auto& win = set.windows[w];
    const auto& s = win.sample;
    if (static_cast<int>(preds[w].size()) != s.clip_len()) throw ContractViolation("evaluate: frame count");
    for (int t = 0; t < s.clip_len(); ++t) {
      const auto k = static_cast<std::size_t>(t);
      const auto& p = preds[w][k];
      FrameRecord rec;
      rec.clip_id = s.clip_id;
      rec.frame = win.first_frame + t;
      rec.truth = s.labels[k];
      rec.predicted = has_classifier ? p.predicted_label() : rec.truth;
      rec.reference = win.reference[k];
      if (is_foreground(rec.truth)) {
        seg_pred.push_back(binarize(p.seg_prob));
        seg_gt.push_back(s.masks[k]);
      }
      cls_pred.push_back(rec.predicted);
      cls_gt.push_back(rec.truth);
      rec.measured = measure_prediction(p.seg_prob, rec.predicted, s.geometry, win.original_spacing);
      if (is_foreground(rec.truth)) {
        add(d_hc, rec.measured.hc_mm, rec.reference.hc_mm);
        add(d_bpd, rec.measured.bpd_mm, rec.reference.bpd_mm);
        add(d_ac, rec.measured.ac_mm, rec.reference.ac_mm);
        add(d_fl, rec.measured.fl_mm, rec.reference.fl_mm);
      }
      ev.frames.push_back(std::move(rec));
    }
  }
  auto& r = ev.report;
  const auto seg = metrics::segmentation_metrics(seg_pred, seg_gt);
  r.iou = seg.iou;
  r.dice = seg.dice;
  if (has_classifier) {
    const auto cls = metrics::classification_metrics(cls_pred, cls_gt);
    r.accuracy = cls.accuracy;
    r.precision = cls.precision;
    r.recall = cls.recall;
    r.f1 = cls.f1;
  } else {
    r.accuracy = r.precision = r.recall = r.f1 = std::numeric_limits<double>::quiet_NaN();
  }
  r.adf_hc = metrics::summarize(d_hc);
  r.adf_bpd = metrics::summarize(d_bpd);
  r.adf_ac = metrics::summarize(d_ac);
  r.adf_fl = metrics::summarize(d_fl);
  return ev;
}

/// Eval-mode predictions for every window, `batch` windows per forward pass.
inline std::vector<std::vector<FramePrediction>> predict(model::FetalNet& net, const ClipSet& set,
                                                         int batch = 8) {
  std::vector<std::vector<FramePrediction>> out;
  const nn::Context ctx{false, nullptr, false};
  for (std::size_t first = 0; first < set.windows.size(); first += static_cast<std::size_t>(batch)) {
    const std::size_t last = std::min(set.windows.size(), first + static_cast<std::size_t>(batch));
    std::vector<const data::Sample*> clips;
    for (std::size_t w = first; w < last; ++w) clips.push_back(&set.windows[w].sample);
    auto preds = model::FetalNet::to_predictions(
        net.forward(stack_frames(clips), static_cast<int>(clips.size()), ctx));
    const auto T = static_cast<std::size_t>(set.clip_len);
    for (std::size_t b = 0; b < clips.size(); ++b)
      out.emplace_back(std::make_move_iterator(preds.begin() + static_cast<std::ptrdiff_t>(b * T)),
                       std::make_move_iterator(preds.begin() + static_cast<std::ptrdiff_t>((b + 1) * T)));
  }
  return out;
}

inline Evaluation evaluate(model::FetalNet& net, const ClipSet& set, int batch = 8) {
  return evaluate_predictions(set, predict(net, set, batch), net.config().classification_branch);
}

/// Predictions equal to the ground truth: masks as probabilities, one-hot
/// logits. Used to check the evaluation path itself.
inline std::vector<std::vector<FramePrediction>> perfect_predictions(const ClipSet& set) {
  std::vector<std::vector<FramePrediction>> out;
  for (const auto& w : set.windows) {
    std::vector<FramePrediction> clip;
    for (int t = 0; t < w.sample.clip_len(); ++t) {
      const auto k = static_cast<std::size_t>(t);
      FramePrediction p;
      const int S = w.sample.frames.h();
      p.seg_prob = Image(S, S, 0.0);
      if (!w.sample.masks[k].empty())
        for (std::size_t i = 0; i < p.seg_prob.size(); ++i) p.seg_prob.data()[i] = w.sample.masks[k].data()[i];
      p.class_logits.fill(-10.0);
      p.class_logits[static_cast<std::size_t>(index_of(w.sample.labels[k]))] = 10.0;
      clip.push_back(std::move(p));
    }
    out.push_back(std::move(clip));
  }
  return out;
}

}  // namespace fetalnet::train
