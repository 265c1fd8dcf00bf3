#pragma once

#include <string>
#include <vector>

#include "fetalnet/data/manifest.hpp"
#include "fetalnet/data/sample.hpp"
#include "fetalnet/geometry/biometry_json.hpp"
#include "fetalnet/model/config.hpp"

namespace fetalnet::train {

/// Reference measurements are read from this file next to the manifest when
/// present (phantom suites write it); otherwise they are measured on the
/// ground-truth masks.
inline std::string reference_sidecar_name() { return "ground_truth.json"; }

/// One training unit: T consecutive frames of a manifest clip.
struct ClipWindow {
  data::Sample sample;
  std::size_t entry = 0;
  int first_frame = 0;
  /// Reference biometry per frame at original resolution.
  std::vector<geometry::BiometryResult> reference;
  double original_spacing = 1.0;
};

struct ClipSet {
  data::DatasetManifest manifest;
  std::vector<ClipWindow> windows;
  int clip_len = 0;
  int input_size = 0;

  std::size_t size() const { return windows.size(); }
};

inline data::Sample slice_sample(const data::Sample& s, int first, int T) {
  data::Sample out;
  out.patient_id = s.patient_id;
  out.clip_id = s.clip_id;
  out.geometry = s.geometry;
  out.frames = Tensor(T, 1, s.frames.h(), s.frames.w());
  const std::size_t plane = s.frames.shape().plane();
  std::copy(s.frames.plane(first, 0), s.frames.plane(first, 0) + plane * static_cast<std::size_t>(T),
            out.frames.data());
  for (int t = first; t < first + T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    out.masks.push_back(s.masks[k]);
    out.labels.push_back(s.labels[k]);
    out.spacing.push_back(s.spacing[k]);
    out.augment.push_back(s.augment[k]);
  }
  return out;
}

/// Measurement of a ground-truth mask through the same cleaning the
/// predictions get.
inline geometry::BiometryResult measure_reference(ClassLabel label, const Mask& mask, double spacing) {
  if (!is_foreground(label) || mask.empty()) {
    geometry::BiometryResult r;
    r.label = label;
    return r;
  }
  Image prob(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) prob.data()[i] = mask.data()[i] ? 1.0 : 0.0;
  return geometry::measure(label, {geometry::postprocess(prob, mask.rows(), mask.cols()), spacing});
}

/// Loads every clip of `m` at network resolution and cuts it into
/// non-overlapping windows of `cfg.clip_len` frames; a trailing remainder
/// shorter than a window is dropped.
inline ClipSet load_clip_set(const data::DatasetManifest& m, const model::NetConfig& cfg,
                             bool letterbox = false) {
  ClipSet set;
  set.manifest = m;
  set.clip_len = cfg.clip_len;
  set.input_size = cfg.input_size;
  const auto sidecar = geometry::load_biometry_sidecar(m.base_dir / reference_sidecar_name());
  const int T = cfg.clip_len;
  for (std::size_t e = 0; e < m.entries.size(); ++e) {
    const auto& entry = m.entries[e];
    const int F = static_cast<int>(entry.frames.size());
    if (F < T) {
      throw DataError("clip " + entry.clip_id + " has " + std::to_string(F) +
                      " frames, fewer than clip_len " + std::to_string(T));
    }
    const auto raw = data::read_clip(m, e);
    for (int f = 0; f < F; ++f) {
      const auto& img = raw.frames[static_cast<std::size_t>(f)];
      const auto& mask = raw.masks[static_cast<std::size_t>(f)];
      if (!mask.empty() && (mask.rows() != img.rows() || mask.cols() != img.cols())) {
        throw DataError("clip " + entry.clip_id + " frame " + std::to_string(f) +
                        ": mask size differs from frame size");
      }
    }
    auto full = data::resize_sample(raw.frames, raw.masks, raw.labels, entry.pixel_spacing_mm,
                                    cfg.input_size, letterbox);
    full.patient_id = entry.patient_id;
    full.clip_id = entry.clip_id;
    const auto it = sidecar.find(entry.clip_id);
    if (it != sidecar.end() && static_cast<int>(it->second.size()) != F) {
      throw DataError("measurement sidecar has " + std::to_string(it->second.size()) +
                      " frames for clip " + entry.clip_id + ", manifest has " + std::to_string(F));
    }
    for (int first = 0; first + T <= F; first += T) {
      ClipWindow w;
      w.sample = slice_sample(full, first, T);
      w.entry = e;
      w.first_frame = first;
      w.original_spacing = entry.pixel_spacing_mm;
      for (int t = first; t < first + T; ++t) {
        const auto k = static_cast<std::size_t>(t);
        w.reference.push_back(it != sidecar.end()
                                  ? it->second[k]
                                  : measure_reference(raw.labels[k], raw.masks[k], entry.pixel_spacing_mm));
      }
      set.windows.push_back(std::move(w));
    }
  }
  return set;
}

/// Stacks windows into one (B*T, 1, S, S) tensor, frame index b*T + t.
inline Tensor stack_frames(const std::vector<const data::Sample*>& clips) {
  if (clips.empty()) throw ContractViolation("stack_frames: no clips");
  const Shape s = clips[0]->frames.shape();
  Tensor out(static_cast<int>(clips.size()) * s.n, s.c, s.h, s.w);
  const std::size_t block = s.numel();
  for (std::size_t b = 0; b < clips.size(); ++b) {
    if (!(clips[b]->frames.shape() == s)) throw ContractViolation("stack_frames: clip shapes differ");
    std::copy(clips[b]->frames.data(), clips[b]->frames.data() + block, out.data() + b * block);
  }
  return out;
}

inline std::vector<FrameTarget> stack_targets(const std::vector<const data::Sample*>& clips) {
  std::vector<FrameTarget> out;
  for (const auto* s : clips) {
    auto t = s->targets();
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

}  // namespace fetalnet::train
