#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "fetalnet/core/grid.hpp"

namespace fetalnet::geometry {

/// Offsets (dy, dx) of a structuring element relative to its anchor.
using StructuringElement = std::vector<std::pair<int, int>>;

/// Cross-shaped element: the centre row and centre column of a size x size square.
inline StructuringElement cross_element(int size) {
  const int r = size / 2;
  StructuringElement se;
  for (int d = -r; d <= r; ++d) se.emplace_back(d, 0);
  for (int d = -r; d <= r; ++d) {
    if (d != 0) se.emplace_back(0, d);
  }
  return se;
}

inline Mask threshold(const Image& prob, double level) {
  Mask out(prob.rows(), prob.cols());
  for (int y = 0; y < prob.rows(); ++y)
    for (int x = 0; x < prob.cols(); ++x) out(y, x) = prob(y, x) > level ? 1 : 0;
  return out;
}

// Out-of-image neighbours are ignored, so the frame border neither erodes nor dilates.
inline Mask erode(const Mask& in, const StructuringElement& se) {
  Mask out(in.rows(), in.cols());
  for (int y = 0; y < in.rows(); ++y) {
    for (int x = 0; x < in.cols(); ++x) {
      std::uint8_t v = 1;
      for (auto [dy, dx] : se) {
        if (in.contains(y + dy, x + dx) && in(y + dy, x + dx) == 0) {
          v = 0;
          break;
        }
      }
      out(y, x) = v;
    }
  }
  return out;
}

inline Mask dilate(const Mask& in, const StructuringElement& se) {
  Mask out(in.rows(), in.cols());
  for (int y = 0; y < in.rows(); ++y) {
    for (int x = 0; x < in.cols(); ++x) {
      std::uint8_t v = 0;
      for (auto [dy, dx] : se) {
        if (in.contains(y - dy, x - dx) && in(y - dy, x - dx) != 0) {
          v = 1;
          break;
        }
      }
      out(y, x) = v;
    }
  }
  return out;
}

inline Mask open(const Mask& in, const StructuringElement& se) { return dilate(erode(in, se), se); }

/// Median filter over a size x size window with replicated borders.
/// For a binary input this is a majority vote.
inline Mask median_blur(const Mask& in, int size) {
  const int r = size / 2;
  const int window = size * size;
  Mask out(in.rows(), in.cols());
  for (int y = 0; y < in.rows(); ++y) {
    for (int x = 0; x < in.cols(); ++x) {
      int ones = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = std::clamp(y + dy, 0, in.rows() - 1);
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = std::clamp(x + dx, 0, in.cols() - 1);
          ones += in(yy, xx) != 0;
        }
      }
      out(y, x) = 2 * ones > window ? 1 : 0;
    }
  }
  return out;
}

}  // namespace fetalnet::geometry
