#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fetalnet/core/prediction.hpp"
#include "fetalnet/core/resample.hpp"
#include "fetalnet/core/tensor.hpp"
#include "fetalnet/data/image_io.hpp"
#include "fetalnet/data/manifest.hpp"

namespace fetalnet::data {

/// Where the network-resolution square sits in the original frame.
struct FrameGeometry {
  int orig_rows = 0;
  int orig_cols = 0;
  int side = 0;      // padded square side before resizing
  int pad_top = 0;
  int pad_left = 0;
  double orig_spacing = 0.0;

  friend bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

/// One augmentation draw. The identity is the default.
struct AugmentParams {
  double rotation_deg = 0.0;
  double brightness = 0.0;
  double contrast = 1.0;
  bool hflip = false;
  bool vflip = false;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

/// A clip at network resolution.
struct Sample {
  std::string patient_id;
  std::string clip_id;
  Tensor frames;                 // T x 1 x S x S, values in [0,1]
  std::vector<Mask> masks;       // S x S, {0,1}
  std::vector<ClassLabel> labels;
  std::vector<double> spacing;   // mm per pixel at network resolution
  FrameGeometry geometry;
  std::vector<AugmentParams> augment;  // per frame

  int clip_len() const { return frames.n(); }

  Image frame(int t) const {
    Image img(frames.h(), frames.w());
    std::copy(frames.plane(t, 0), frames.plane(t, 0) + img.size(), img.data());
    return img;
  }

  std::vector<FrameTarget> targets() const {
    std::vector<FrameTarget> out;
    for (std::size_t t = 0; t < labels.size(); ++t) out.push_back({masks[t], labels[t]});
    return out;
  }
};

namespace detail {

template <typename T>
Grid<T> pad_square(const Grid<T>& in, int side, int top, int left) {
  Grid<T> out(side, side, T{});
  for (int r = 0; r < in.rows(); ++r)
    for (int c = 0; c < in.cols(); ++c) out(r + top, c + left) = in(r, c);
  return out;
}

}  // namespace detail

/// Resizes frames (bilinear) and masks (nearest) to target x target. Non-square
/// frames are rejected unless `letterbox`, which zero-pads them to a centred
/// square first. An empty mask stands for "no mask" and becomes all zeros.
inline Sample resize_sample(const std::vector<Image>& frames, const std::vector<Mask>& masks,
                            const std::vector<ClassLabel>& labels, double spacing, int target,
                            bool letterbox = false) {
  if (frames.empty()) throw InvalidInput("resize_sample: no frames");
  if (masks.size() != frames.size() || labels.size() != frames.size())
    throw ContractViolation("resize_sample: frames, masks and labels differ in count");
  if (target < 1) throw InvalidInput("resize_sample: target size must be positive");
  if (!(spacing > 0.0)) throw DataError("resize_sample: pixel spacing must be positive");
  const int rows = frames[0].rows(), cols = frames[0].cols();
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].rows() != rows || frames[t].cols() != cols)
      throw DataError("resize_sample: frame " + std::to_string(t) + " differs in size from frame 0");
    if (!masks[t].empty() && (masks[t].rows() != rows || masks[t].cols() != cols))
      throw DataError("resize_sample: mask " + std::to_string(t) + " differs in size from its frame");
  }
  if (rows != cols && !letterbox) {
    throw DataError("resize_sample: non-square frame " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " needs letterboxing");
  }
  FrameGeometry g{rows, cols, std::max(rows, cols), 0, 0, spacing};
  g.pad_top = (g.side - rows) / 2;
  g.pad_left = (g.side - cols) / 2;

  Sample s;
  s.geometry = g;
  const int T = static_cast<int>(frames.size());
  s.frames = Tensor(T, 1, target, target);
  const double new_spacing = spacing * g.side / target;
  for (int t = 0; t < T; ++t) {
    const auto& f = frames[static_cast<std::size_t>(t)];
    const Image sq = rows == cols ? f : detail::pad_square(f, g.side, g.pad_top, g.pad_left);
    const Image small = resize_bilinear(sq, target, target);
    std::copy(small.begin(), small.end(), s.frames.plane(t, 0));
    const auto& m = masks[static_cast<std::size_t>(t)];
    if (m.empty()) {
      s.masks.emplace_back(target, target, 0);
    } else {
      const Mask msq = rows == cols ? m : detail::pad_square(m, g.side, g.pad_top, g.pad_left);
      Mask r = resize_nearest(msq, target, target);
      for (auto& v : r) v = v ? 1 : 0;
      s.masks.push_back(std::move(r));
    }
    s.labels.push_back(labels[static_cast<std::size_t>(t)]);
    s.spacing.push_back(new_spacing);
  }
  s.augment.assign(frames.size(), AugmentParams{});
  return s;
}

/// Maps a network-resolution map back onto the original frame grid.
inline Image to_original(const Image& net_map, const FrameGeometry& g) {
  const Image sq = resize_bilinear(net_map, g.side, g.side);
  if (g.side == g.orig_rows && g.side == g.orig_cols) return sq;
  Image out(g.orig_rows, g.orig_cols);
  for (int r = 0; r < g.orig_rows; ++r)
    for (int c = 0; c < g.orig_cols; ++c) out(r, c) = sq(r + g.pad_top, c + g.pad_left);
  return out;
}

/// Original-resolution frames and masks of one manifest entry.
struct RawClip {
  std::vector<Image> frames;
  std::vector<Mask> masks;
  std::vector<ClassLabel> labels;
};

inline RawClip read_clip(const DatasetManifest& m, std::size_t entry) {
  const auto& c = m.entries.at(entry);
  RawClip raw;
  for (const auto& f : c.frames) {
    raw.frames.push_back(read_gray(m.resolve(f.path)));
    raw.masks.push_back(f.mask ? read_mask(m.resolve(*f.mask)) : Mask());
    raw.labels.push_back(f.label);
  }
  return raw;
}

inline Sample load_sample(const DatasetManifest& m, std::size_t entry, int target,
                          bool letterbox = false) {
  const auto& c = m.entries.at(entry);
  const RawClip raw = read_clip(m, entry);
  Sample s = resize_sample(raw.frames, raw.masks, raw.labels, c.pixel_spacing_mm, target, letterbox);
  s.patient_id = c.patient_id;
  s.clip_id = c.clip_id;
  return s;
}

// --- augmentation -------------------------------------------------------------

struct AugmentRanges {
  double max_rotation_deg = 15.0;
  double max_brightness = 0.2;
  double min_contrast = 0.8;
  double max_contrast = 1.2;
  double flip_probability = 0.5;
};

inline AugmentParams draw_augment(std::uint64_t seed, const AugmentRanges& r = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rot(-r.max_rotation_deg, r.max_rotation_deg);
  std::uniform_real_distribution<double> bright(-r.max_brightness, r.max_brightness);
  std::uniform_real_distribution<double> contrast(r.min_contrast, r.max_contrast);
  std::bernoulli_distribution flip(r.flip_probability);
  AugmentParams p;
  p.rotation_deg = rot(rng);
  p.brightness = bright(rng);
  p.contrast = contrast(rng);
  p.hflip = flip(rng);
  p.vflip = flip(rng);
  return p;
}

namespace detail {

/// Source coordinate of output pixel (y, x): inverse rotation about the image
/// centre, after undoing the flips.
inline std::pair<double, double> source_of(int y, int x, int n, const AugmentParams& p) {
  const double c = 0.5 * (n - 1);
  const double fy = p.vflip ? (n - 1 - y) : y;
  const double fx = p.hflip ? (n - 1 - x) : x;
  const double th = p.rotation_deg * std::numbers::pi / 180.0;
  const double dy = fy - c, dx = fx - c;
  // forward rotation maps source s to c + R(s - c); invert with R^T
  const double sx = std::cos(th) * dx + std::sin(th) * dy + c;
  const double sy = -std::sin(th) * dx + std::cos(th) * dy + c;
  return {sy, sx};
}

}  // namespace detail

/// Rotation then flips; zero fill outside the frame.
inline Image transform_frame(const Image& in, const AugmentParams& p) {
  const int n = in.rows();
  Image out(n, in.cols());
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < in.cols(); ++x) {
      const auto [sy, sx] = detail::source_of(y, x, n, p);
      const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
      const double wy = sy - y0, wx = sx - x0;
      double v = 0.0;
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          const int yy = y0 + a, xx = x0 + b;
          if (!in.contains(yy, xx)) continue;
          v += (a ? wy : 1 - wy) * (b ? wx : 1 - wx) * in(yy, xx);
        }
      out(y, x) = std::clamp(v * p.contrast + p.brightness, 0.0, 1.0);
    }
  return out;
}

inline Mask transform_mask(const Mask& in, const AugmentParams& p) {
  const int n = in.rows();
  Mask out(n, in.cols());
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < in.cols(); ++x) {
      const auto [sy, sx] = detail::source_of(y, x, n, p);
      const int yy = static_cast<int>(std::lround(sy)), xx = static_cast<int>(std::lround(sx));
      out(y, x) = in.contains(yy, xx) ? in(yy, xx) : 0;
    }
  return out;
}

/// Applies one parameter set to every frame and mask of the clip.
inline Sample apply_augment(const Sample& s, const AugmentParams& p) {
  if (s.frames.h() != s.frames.w()) throw ContractViolation("augment: square frames expected");
  Sample out = s;
  for (int t = 0; t < s.clip_len(); ++t) {
    const Image f = transform_frame(s.frame(t), p);
    std::copy(f.begin(), f.end(), out.frames.plane(t, 0));
    out.masks[static_cast<std::size_t>(t)] = transform_mask(s.masks[static_cast<std::size_t>(t)], p);
  }
  out.augment.assign(static_cast<std::size_t>(s.clip_len()), p);
  return out;
}

/// One random draw per clip, applied identically to all its frames.
inline Sample augment_clip(const Sample& s, std::uint64_t seed, const AugmentRanges& r = {}) {
  return apply_augment(s, draw_augment(seed, r));
}

}  // namespace fetalnet::data
