#pragma once

#include <array>
#include <vector>

#include "fetalnet/core/class_label.hpp"
#include "fetalnet/core/grid.hpp"

namespace fetalnet {

using Logits = std::array<double, kNumClasses>;

/// Network output for one frame.
struct FramePrediction {
  Image seg_prob;               // input_size x input_size, values in [0,1]
  Logits class_logits{};        // Head, Abdomen, Femur, Background
  std::vector<Image> side_probs;  // per-side sigmoid maps at input size

  ClassLabel predicted_label() const {
    int best = 0;
    for (int k = 1; k < kNumClasses; ++k)
      if (class_logits[k] > class_logits[best]) best = k;
    return static_cast<ClassLabel>(best);
  }
};

/// Supervision for one frame.
struct FrameTarget {
  Mask mask;
  ClassLabel label = ClassLabel::Background;
};

}  // namespace fetalnet
