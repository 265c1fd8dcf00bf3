#pragma once

#include <span>
#include <vector>

#include "fetalnet/loss/loss.hpp"
#include "fetalnet/model/fetalnet.hpp"

namespace fetalnet::train {

/// Network outputs as per-frame predictions plus the loss gradients mapped
/// back onto the output tensors.
struct StepResult {
  loss::LossTerms terms;
  std::vector<FramePrediction> preds;
};

inline loss::LossOptions loss_options_for(const model::NetConfig& cfg, loss::LossWeights w = {}) {
  loss::LossOptions opt;
  opt.weights = w;
  opt.use_classification = cfg.classification_branch;
  return opt;
}

/// One forward pass and, when `backprop` is set, the matching backward pass.
/// Gradients accumulate into the model parameters.
inline StepResult forward_backward(model::FetalNet& net, const Tensor& frames, int clips,
                                   std::span<const FrameTarget> targets,
                                   const loss::LossOptions& opt, const nn::Context& ctx,
                                   bool backprop = true) {
  model::Tape tape;
  auto out = net.forward(frames, clips, ctx, backprop ? &tape : nullptr);
  StepResult r;
  r.preds = model::FetalNet::to_predictions(out);
  if (!backprop) {
    r.terms = loss::total_loss(r.preds, targets, opt);
    return r;
  }
  loss::LossGradients g;
  r.terms = loss::total_loss(r.preds, targets, opt, &g);
  Tensor d_seg(out.seg_prob.shape());
  Tensor d_logits;
  if (!out.logits.empty()) d_logits = Tensor(out.logits.shape());
  for (int n = 0; n < frames.n(); ++n) {
    const auto& img = g.d_seg_prob[static_cast<std::size_t>(n)];
    std::copy(img.begin(), img.end(), d_seg.plane(n, 0));
    if (!d_logits.empty()) {
      for (int k = 0; k < kNumClasses; ++k)
        d_logits.at(n, k, 0, 0) = g.d_logits[static_cast<std::size_t>(n)][static_cast<std::size_t>(k)];
    }
  }
  net.backward(tape, d_seg, d_logits);
  return r;
}

}  // namespace fetalnet::train
