#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "fetalnet/core/class_label.hpp"
#include "fetalnet/core/error.hpp"
#include "fetalnet/core/grid.hpp"
#include "fetalnet/core/prediction.hpp"

namespace fetalnet::loss {

/// Per-class weights of the cross-entropy term, indexed by ClassLabel.
struct LossWeights {
  std::array<double, kNumClasses> w{0.25, 0.25, 0.4, 0.1};

  double operator[](ClassLabel l) const { return w[static_cast<std::size_t>(index_of(l))]; }

  void validate() const {
    bool any_positive = false;
    for (double v : w) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
      any_positive |= v > 0.0;
    }
    if (!any_positive) throw ConfigError("at least one loss weight must be positive");
  }
};

inline constexpr double kDiceSmooth = 1.0;

/// 1 - (2 sum(p t) + s) / (sum(p) + sum(t) + s).
inline double dice_loss(std::span<const double> pred, std::span<const double> target,
                        double smooth = kDiceSmooth) {
  if (pred.size() != target.size()) {
    throw ContractViolation("dice_loss: prediction has " + std::to_string(pred.size()) +
                            " values, target " + std::to_string(target.size()));
  }
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * target[i];
    sp += pred[i];
    st += target[i];
  }
  return 1.0 - (2.0 * inter + smooth) / (sp + st + smooth);
}

/// Gradient of dice_loss with respect to every prediction value; returns the loss.
inline double dice_loss_grad(std::span<const double> pred, std::span<const double> target,
                             std::span<double> grad, double smooth = kDiceSmooth) {
  if (pred.size() != target.size() || grad.size() != pred.size()) {
    throw ContractViolation("dice_loss_grad: size mismatch");
  }
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * target[i];
    sp += pred[i];
    st += target[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = sp + st + smooth;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    grad[i] = -(2.0 * target[i] * den - num) / (den * den);
  }
  return 1.0 - num / den;
}

inline std::array<double, kNumClasses> softmax(const Logits& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::array<double, kNumClasses> p{};
  double sum = 0.0;
  for (int k = 0; k < kNumClasses; ++k) sum += p[k] = std::exp(z[k] - m);
  for (auto& v : p) v /= sum;
  return p;
}

/// -w[label] * log softmax(logits)[label], computed with log-sum-exp.
inline double weighted_ce(const Logits& logits, ClassLabel label, const LossWeights& w) {
  for (double z : logits)
    if (!std::isfinite(z)) throw InvalidInput("weighted_ce: non-finite logit");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double log_p = logits[static_cast<std::size_t>(index_of(label))] - m - std::log(sum);
  return -w[label] * log_p;
}

inline double weighted_ce_grad(const Logits& logits, ClassLabel label, const LossWeights& w,
                               Logits& grad) {
  const auto p = softmax(logits);
  const double wl = w[label];
  for (int k = 0; k < kNumClasses; ++k) {
    grad[k] = wl * (p[k] - (k == index_of(label) ? 1.0 : 0.0));
  }
  return weighted_ce(logits, label, w);
}

struct LossOptions {
  LossWeights weights;
  /// When false the cross-entropy term is dropped (no classification branch).
  bool use_classification = true;
  double smooth = kDiceSmooth;
};

struct LossTerms {
  double dice = 0.0;  // mean over foreground frames; 0 if there are none
  double ce = 0.0;    // mean over all frames
  double total() const { return dice + ce; }
};

/// Gradients of the total loss with respect to each frame's seg_prob and logits.
struct LossGradients {
  std::vector<Image> d_seg_prob;
  std::vector<Logits> d_logits;
};

inline void check_targets(std::span<const FramePrediction> preds,
                          std::span<const FrameTarget> targets) {
  if (preds.empty()) throw InvalidInput("total_loss: no frames");
  if (preds.size() != targets.size()) {
    throw ContractViolation("total_loss: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(targets.size()) + " targets");
  }
}

inline std::vector<double> mask_values(const Mask& m) {
  return std::vector<double>(m.begin(), m.end());
}

/// Mean dice loss over non-Background frames plus mean weighted CE over all frames.
inline LossTerms total_loss(std::span<const FramePrediction> preds,
                            std::span<const FrameTarget> targets, const LossOptions& opt = {},
                            LossGradients* grads = nullptr) {
  check_targets(preds, targets);
  const std::size_t n = preds.size();
  std::size_t fg_frames = 0;
  for (const auto& t : targets) fg_frames += is_foreground(t.label);

  if (grads) {
    grads->d_seg_prob.assign(n, Image());
    grads->d_logits.assign(n, Logits{});
  }
  LossTerms terms;
  for (std::size_t f = 0; f < n; ++f) {
    const auto& p = preds[f];
    const auto& t = targets[f];
    if (grads) grads->d_seg_prob[f] = Image(p.seg_prob.rows(), p.seg_prob.cols(), 0.0);
    if (is_foreground(t.label)) {
      if (t.mask.rows() != p.seg_prob.rows() || t.mask.cols() != p.seg_prob.cols()) {
        throw ContractViolation("total_loss: mask size differs from prediction size");
      }
      const auto tv = mask_values(t.mask);
      std::span<const double> pv(p.seg_prob.data(), p.seg_prob.size());
      if (grads) {
        std::span<double> g(grads->d_seg_prob[f].data(), p.seg_prob.size());
        terms.dice += dice_loss_grad(pv, tv, g, opt.smooth);
        for (auto& v : g) v /= static_cast<double>(fg_frames);
      } else {
        terms.dice += dice_loss(pv, tv, opt.smooth);
      }
    }
    if (opt.use_classification) {
      if (grads) {
        terms.ce += weighted_ce_grad(p.class_logits, t.label, opt.weights, grads->d_logits[f]);
        for (auto& v : grads->d_logits[f]) v /= static_cast<double>(n);
      } else {
        terms.ce += weighted_ce(p.class_logits, t.label, opt.weights);
      }
    }
  }
  if (fg_frames > 0) terms.dice /= static_cast<double>(fg_frames);
  terms.ce /= static_cast<double>(n);
  return terms;
}

}  // namespace fetalnet::loss
