#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "fetalnet/data/image_io.hpp"
#include "fetalnet/data/manifest.hpp"
#include "fetalnet/geometry/biometry_json.hpp"
#include "fetalnet/geometry/ellipse.hpp"
#include "fetalnet/geometry/measure.hpp"

namespace fetalnet::phantom {

using geometry::BiometryResult;

/// Rotated ellipse; angle measured from the x (column) axis towards y (row).
struct EllipseShape {
  double a = 0.0;  // semi-axis along the angle
  double b = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double theta = 0.0;
};

/// Rectangle with semicircular caps; `length` is end to end, `width` the diameter.
struct CapsuleShape {
  double length = 0.0;
  double width = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double theta = 0.0;
};

struct PhantomSpec {
  ClassLabel label = ClassLabel::Background;
  std::variant<std::monostate, EllipseShape, CapsuleShape> shape;
  int size = 64;                  // square frame side, pixels
  double spacing = 0.2;           // mm per pixel
  int clip_len = 5;
  std::array<double, 2> drift{0.0, 0.0};  // (dx, dy) pixels per frame
  double noise = 0.0;             // speckle sigma
  std::uint64_t seed = 0;
};

struct PhantomClip {
  std::vector<Image> frames;
  std::vector<Mask> masks;        // empty grid for Background frames
  std::vector<ClassLabel> labels;
  double spacing = 0.0;
  std::vector<BiometryResult> ground_truth;
};

// Grey levels of the rendered structures before speckle.
inline constexpr double kTissue = 0.15;
inline constexpr double kSkull = 0.9;
inline constexpr double kBrain = 0.45;
inline constexpr double kAbdomen = 0.55;
inline constexpr double kBone = 0.9;

/// Half extents (x, y) of the axis-aligned bounding box.
inline std::array<double, 2> half_extent(const EllipseShape& e) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  return {std::hypot(e.a * c, e.b * s), std::hypot(e.a * s, e.b * c)};
}

inline std::array<double, 2> half_extent(const CapsuleShape& k) {
  const double half = 0.5 * (k.length - k.width), r = 0.5 * k.width;
  return {half * std::abs(std::cos(k.theta)) + r, half * std::abs(std::sin(k.theta)) + r};
}

/// Ellipse-normalised radius squared of point (x, y); <= 1 inside.
inline double ellipse_rho2(const EllipseShape& e, double x, double y) {
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  const double dx = x - e.cx, dy = y - e.cy;
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  return u * u / (e.a * e.a) + v * v / (e.b * e.b);
}

inline bool inside(const CapsuleShape& k, double x, double y) {
  const double c = std::cos(k.theta), s = std::sin(k.theta);
  const double dx = x - k.cx, dy = y - k.cy;
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  const double uu = std::max(std::abs(u) - 0.5 * (k.length - k.width), 0.0);
  const double r = 0.5 * k.width;
  return uu * uu + v * v <= r * r;
}

/// Analytic measurements from the geometry (never from pixels).
inline BiometryResult analytic_truth(const PhantomSpec& spec) {
  BiometryResult r;
  r.label = spec.label;
  if (const auto* e = std::get_if<EllipseShape>(&spec.shape)) {
    const double major = std::max(e->a, e->b), minor = std::min(e->a, e->b);
    const double perim = geometry::ellipse_perimeter(major, minor) * spec.spacing;
    if (spec.label == ClassLabel::Head) {
      r.hc_mm = perim;
      r.bpd_mm = 2.0 * minor * spec.spacing;
    } else if (spec.label == ClassLabel::Abdomen) {
      r.ac_mm = perim;
    }
  } else if (const auto* k = std::get_if<CapsuleShape>(&spec.shape)) {
    if (spec.label == ClassLabel::Femur) r.fl_mm = k->length * spec.spacing;
  }
  return r;
}

/// Throws SpecError unless the spec is renderable.
inline void check_spec(const PhantomSpec& spec) {
  if (spec.size < 8) throw SpecError("phantom size must be at least 8 px");
  if (spec.clip_len < 1) throw SpecError("phantom clip_len must be >= 1");
  if (!(spec.spacing > 0.0)) throw SpecError("phantom spacing must be positive");
  if (!(spec.noise >= 0.0)) throw SpecError("phantom noise sigma must be >= 0");
  std::array<double, 2> ext{0.0, 0.0}, centre{0.0, 0.0};
  switch (spec.label) {
    case ClassLabel::Background:
      return;
    case ClassLabel::Head:
    case ClassLabel::Abdomen: {
      const auto* e = std::get_if<EllipseShape>(&spec.shape);
      if (!e) throw SpecError("head and abdomen phantoms need an ellipse");
      if (!(e->a > 0.0 && e->b > 0.0)) throw SpecError("ellipse axes must be positive");
      ext = half_extent(*e);
      centre = {e->cx, e->cy};
      break;
    }
    case ClassLabel::Femur: {
      const auto* k = std::get_if<CapsuleShape>(&spec.shape);
      if (!k) throw SpecError("femur phantoms need a capsule");
      if (!(k->width > 0.0 && k->length >= k->width))
        throw SpecError("capsule needs width > 0 and length >= width");
      ext = half_extent(*k);
      centre = {k->cx, k->cy};
      break;
    }
  }
  // One pixel of clearance on every side for every frame.
  for (int t : {0, spec.clip_len - 1}) {
    for (int axis = 0; axis < 2; ++axis) {
      const double c = centre[axis] + spec.drift[axis] * t;
      if (c - ext[axis] < 1.0 || c + ext[axis] > spec.size - 2.0) {
        throw SpecError("phantom geometry leaves the " + std::to_string(spec.size) + " px frame at frame " +
                        std::to_string(t));
      }
    }
  }
}

/// Renders the clip. Masks are the clean rasterisations; frames carry speckle
/// pixel * (1 + sigma * n), n standard normal, clamped to [0,1].
inline PhantomClip generate(const PhantomSpec& spec) {
  check_spec(spec);
  PhantomClip clip;
  clip.spacing = spec.spacing;
  const BiometryResult truth = analytic_truth(spec);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = spec.size;
  for (int t = 0; t < spec.clip_len; ++t) {
    Image img(n, n, kTissue);
    Mask mask = spec.label == ClassLabel::Background ? Mask() : Mask(n, n, 0);
    const double ox = spec.drift[0] * t, oy = spec.drift[1] * t;
    if (const auto* e0 = std::get_if<EllipseShape>(&spec.shape); e0 && spec.label != ClassLabel::Background) {
      EllipseShape e = *e0;
      e.cx += ox;
      e.cy += oy;
      // skull ring about 12% of the minor semi-axis thick, at least 2 px
      const double ring = std::max(2.0, 0.12 * std::min(e.a, e.b));
      EllipseShape inner = e;
      inner.a = std::max(e.a - ring, 0.5);
      inner.b = std::max(e.b - ring, 0.5);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          if (ellipse_rho2(e, x, y) > 1.0) continue;
          mask(y, x) = 1;
          if (spec.label == ClassLabel::Head) {
            img(y, x) = ellipse_rho2(inner, x, y) <= 1.0 ? kBrain : kSkull;
          } else {
            img(y, x) = kAbdomen;
          }
        }
    } else if (const auto* k0 = std::get_if<CapsuleShape>(&spec.shape);
               k0 && spec.label != ClassLabel::Background) {
      CapsuleShape k = *k0;
      k.cx += ox;
      k.cy += oy;
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          if (inside(k, x, y)) {
            mask(y, x) = 1;
            img(y, x) = kBone;
          }
    }
    if (spec.noise > 0.0) {
      for (auto& v : img) v = std::clamp(v * (1.0 + spec.noise * normal(rng)), 0.0, 1.0);
    }
    clip.frames.push_back(std::move(img));
    clip.masks.push_back(std::move(mask));
    clip.labels.push_back(spec.label);
    clip.ground_truth.push_back(truth);
  }
  return clip;
}

// --- random geometry ----------------------------------------------------------

struct GeometryRanges {
  // fractions of the frame side
  double head_a_min = 0.16, head_a_max = 0.32, head_aspect_max = 1.4;
  double abdomen_a_min = 0.16, abdomen_a_max = 0.32, abdomen_aspect_max = 1.25;
  double femur_len_min = 0.40, femur_len_max = 0.70;
  double femur_width_min = 0.07, femur_width_max = 0.11;
  double max_drift = 1.0;  // px per frame
};

/// Random renderable spec of the given class.
inline PhantomSpec random_spec(ClassLabel label, int size, int clip_len, double spacing,
                               double noise, std::uint64_t seed, const GeometryRanges& g = {}) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  PhantomSpec spec;
  spec.label = label;
  spec.size = size;
  spec.clip_len = clip_len;
  spec.spacing = spacing;
  spec.noise = noise;
  spec.seed = rng();
  const double theta = uni(0.0, std::numbers::pi);
  const double drift_angle = uni(0.0, 2.0 * std::numbers::pi);
  const double drift = uni(0.0, g.max_drift);
  spec.drift = {drift * std::cos(drift_angle), drift * std::sin(drift_angle)};
  std::array<double, 2> ext{0.0, 0.0};
  if (label == ClassLabel::Head || label == ClassLabel::Abdomen) {
    const bool head = label == ClassLabel::Head;
    const double a = size * uni(head ? g.head_a_min : g.abdomen_a_min, head ? g.head_a_max : g.abdomen_a_max);
    const double b = a / uni(1.0, head ? g.head_aspect_max : g.abdomen_aspect_max);
    EllipseShape e{a, b, 0.0, 0.0, theta};
    ext = half_extent(e);
    spec.shape = e;
  } else if (label == ClassLabel::Femur) {
    const double w = std::max(3.0, size * uni(g.femur_width_min, g.femur_width_max));
    const double len = std::max(w, size * uni(g.femur_len_min, g.femur_len_max));
    CapsuleShape k{len, w, 0.0, 0.0, theta};
    ext = half_extent(k);
    spec.shape = k;
  }
  // Centre chosen so the whole drift path keeps one pixel of clearance.
  std::array<double, 2> c{};
  for (int axis = 0; axis < 2; ++axis) {
    const double travel = spec.drift[axis] * (clip_len - 1);
    const double lo = 1.0 + ext[axis] - std::min(0.0, travel) + 1e-6;
    const double hi = size - 2.0 - ext[axis] - std::max(0.0, travel) - 1e-6;
    if (lo > hi) {
      spec.drift[axis] = 0.0;
      c[axis] = 0.5 * (size - 1);
    } else {
      c[axis] = uni(lo, hi);
    }
  }
  if (auto* e = std::get_if<EllipseShape>(&spec.shape)) {
    e->cx = c[0];
    e->cy = c[1];
  } else if (auto* k = std::get_if<CapsuleShape>(&spec.shape)) {
    k->cx = c[0];
    k->cy = c[1];
  }
  check_spec(spec);
  return spec;
}

// --- suites on disk -----------------------------------------------------------

struct SuiteOptions {
  int size = 64;
  int clip_len = 5;
  double noise = 0.1;
  double spacing_min = 0.1;
  double spacing_max = 0.4;
  int clips_per_patient = 1;
  GeometryRanges geometry;
};

/// Background-heavy default mix (Head, Abdomen, Femur, Background).
inline constexpr std::array<double, 4> kDefaultMix{0.2, 0.2, 0.15, 0.45};

/// Apportions `total` clips over the class weights (largest remainder).
inline std::array<int, 4> class_counts(int total, const std::array<double, 4>& mix) {
  double sum = 0.0;
  for (double w : mix) {
    if (!(w >= 0.0)) throw SpecError("class mix weights must be nonnegative");
    sum += w;
  }
  if (!(sum > 0.0)) throw SpecError("class mix needs a positive weight");
  std::array<int, 4> count{};
  std::array<double, 4> frac{};
  int used = 0;
  for (int k = 0; k < 4; ++k) {
    const double share = total * mix[k] / sum;
    count[k] = static_cast<int>(std::floor(share + 1e-9));
    frac[k] = share - count[k];
    used += count[k];
  }
  while (used < total) {
    int best = 0;
    for (int k = 1; k < 4; ++k)
      if (frac[k] > frac[best]) best = k;
    ++count[best];
    frac[best] = -1.0;
    ++used;
  }
  return count;
}

struct Suite {
  data::DatasetManifest manifest;
  std::vector<PhantomSpec> specs;  // one per manifest entry
};

inline std::string ground_truth_file() { return "ground_truth.json"; }

/// Writes frames (16-bit PNG), masks (8-bit PNG), manifest.json and the
/// ground-truth sidecar under `dir`.
inline Suite generate_suite(const std::filesystem::path& dir, int n_clips,
                            const std::array<double, 4>& mix, std::uint64_t seed,
                            const SuiteOptions& opt = {}) {
  if (n_clips < 1) throw SpecError("suite needs at least one clip");
  if (opt.clips_per_patient < 1) throw SpecError("clips_per_patient must be >= 1");
  const auto counts = class_counts(n_clips, mix);
  std::vector<ClassLabel> labels;
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < counts[k]; ++i) labels.push_back(label_from_index(k));
  std::mt19937_64 rng(seed);
  std::shuffle(labels.begin(), labels.end(), rng);

  Suite suite;
  suite.manifest.base_dir = dir;
  nlohmann::ordered_json truth = nlohmann::ordered_json::object();
  std::filesystem::create_directories(dir);
  for (int i = 0; i < n_clips; ++i) {
    const double spacing = std::uniform_real_distribution<double>(opt.spacing_min, opt.spacing_max)(rng);
    const std::uint64_t clip_seed = rng();
    auto spec = random_spec(labels[static_cast<std::size_t>(i)], opt.size, opt.clip_len, spacing,
                            opt.noise, clip_seed, opt.geometry);
    const auto clip = generate(spec);
    char id[32], pid[32];
    std::snprintf(id, sizeof id, "clip%04d", i);
    std::snprintf(pid, sizeof pid, "patient%04d", i / opt.clips_per_patient);
    data::ClipEntry entry{pid, id, spacing, {}};
    nlohmann::ordered_json frames_truth = nlohmann::ordered_json::array();
    for (int t = 0; t < opt.clip_len; ++t) {
      char fname[64];
      std::snprintf(fname, sizeof fname, "%s_%02d.png", id, t);
      data::FrameEntry fr;
      fr.index = t;
      fr.path = std::string("frames/") + fname;
      fr.label = clip.labels[static_cast<std::size_t>(t)];
      data::write_gray(dir / fr.path, clip.frames[static_cast<std::size_t>(t)], 16);
      if (is_foreground(fr.label)) {
        fr.mask = std::string("masks/") + fname;
        data::write_mask(dir / *fr.mask, clip.masks[static_cast<std::size_t>(t)]);
      }
      frames_truth.push_back(geometry::to_json(clip.ground_truth[static_cast<std::size_t>(t)],
                                               std::string(id) + "/" + std::to_string(t)));
      entry.frames.push_back(std::move(fr));
    }
    truth[id] = std::move(frames_truth);
    suite.manifest.entries.push_back(std::move(entry));
    suite.specs.push_back(spec);
  }
  data::save_manifest(dir / "manifest.json", suite.manifest);
  std::ofstream(dir / ground_truth_file()) << truth.dump(2) << "\n";
  return suite;
}

/// Per-clip analytic measurements read from a suite's sidecar; empty when absent.
inline std::map<std::string, std::vector<BiometryResult>> load_ground_truth(
    const std::filesystem::path& dir) {
  return geometry::load_biometry_sidecar(dir / ground_truth_file());
}

}  // namespace fetalnet::phantom
