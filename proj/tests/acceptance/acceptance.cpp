// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
// Usage: fetalnet_acceptance [criterion ...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "fetalnet/data/sample.hpp"
#include "fetalnet/data/splits.hpp"
#include "fetalnet/geometry/measure.hpp"
#include "fetalnet/loss/loss.hpp"
#include "fetalnet/loss/metrics.hpp"
#include "fetalnet/model/checkpoint.hpp"
#include "fetalnet/phantom/phantom.hpp"
#include "fetalnet/train/ablation.hpp"
#include "fetalnet/train/objective.hpp"
#include "gradcheck.hpp"
#include "test_shapes.hpp"

using namespace fetalnet;
namespace fs = std::filesystem;
namespace fg = fetalnet::geometry;
using fetalnet::nn::Context;

namespace {

constexpr double kPi = std::numbers::pi;

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Collects failed sub-checks; the first few are printed.
struct Checks {
  int failed = 0;
  int total = 0;

  void expect(bool ok, const std::string& what) {
    ++total;
    if (ok) return;
    if (failed < 10) std::printf("    failed: %s\n", what.c_str());
    ++failed;
  }
  bool ok() const { return failed == 0; }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

model::NetConfig toy(int n, int size, int T) {
  model::NetConfig c;
  c.base_width = n;
  c.input_size = size;
  c.clip_len = T;
  return c;
}

void randomize_non_weights(model::FetalNet& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 0.1);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  net.visit([&](const std::string& name, nn::Param& p) {
    if (name.ends_with(".weight")) return;
    const bool positive = name.ends_with("running_var") || name.ends_with("gamma");
    for (auto& v : p.value.values()) v = positive ? u(rng) : d(rng);
  });
}

Tensor random_frames(int n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(n, 1, size, size);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

Tensor slice_frames(const Tensor& x, int first, int count) {
  Tensor out(count, x.c(), x.h(), x.w());
  std::copy(x.sample(first), x.sample(first) + out.size(), out.data());
  return out;
}

Mask clean(const Mask& m) {
  Image prob(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) prob(r, c) = m(r, c);
  return fg::postprocess(prob, m.rows(), m.cols());
}

double head_hc(const Mask& m, double spacing) {
  return fg::measure(ClassLabel::Head, {clean(m), spacing}).hc_mm.value_or(NAN);
}

Image to_image(const Mask& m) {
  Image img(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) img(r, c) = m(r, c) ? 0.9 : 0.1;
  return img;
}

// ---------------------------------------------------------------------------

bool gradient_check() {
  Timer timer;
  const auto cfg = toy(4, 32, 2);
  model::FetalNet net(cfg);
  net.init(17);
  randomize_non_weights(net, 17);
  const Tensor frames = random_frames(2, 32, 17);
  std::vector<FrameTarget> targets(2);
  targets[0] = {testing::raster_ellipse(32, 32, 15.5, 16.0, 9.0, 6.0, 0.4), ClassLabel::Head};
  targets[1] = {testing::raster_capsule(32, 32, 16.0, 15.0, 14.0, 3.0, 1.0), ClassLabel::Femur};
  const auto opt = train::loss_options_for(cfg);
  std::mt19937_64 rng;
  auto run = [&](bool backprop) {
    rng.seed(5);
    return train::forward_backward(net, frames, 1, targets, opt, Context{true, &rng}, backprop).terms.total();
  };
  net.zero_grad();
  run(true);

  std::mt19937_64 pick(1);
  int checked = 0, kinks = 0, tensors = 0;
  double raw_worst = 0.0, smooth_worst = 0.0;
  std::string raw_worst_at;
  Checks chk;
  net.visit([&](const std::string& name, nn::Param& p) {
    if (!p.trainable) return;
    ++tensors;
    for (std::size_t i : testing::sample_indices(p.value.size(), 8, pick)) {
      const double num = testing::numeric_grad(p.value, i, [&] { return run(false); }, 1e-5);
      const double err = testing::rel_error(p.grad[i], num);
      ++checked;
      if (err > raw_worst) {
        raw_worst = err;
        raw_worst_at = name + "[" + std::to_string(i) + "]";
      }
      if (err < 1e-3) {
        smooth_worst = std::max(smooth_worst, err);
        continue;
      }
      // a ReLU / max-pool switch inside the +-1e-5 interval; must agree at 1e-6
      ++kinks;
      const double fine = testing::numeric_grad(p.value, i, [&] { return run(false); }, 1e-6);
      chk.expect(testing::rel_error(p.grad[i], fine) < 1e-3,
                 name + "[" + std::to_string(i) + "]" +
                     fmt(" analytic %.6g numeric(1e-5) %.6g numeric(1e-6) %.6g", p.grad[i], num, fine));
    }
  });
  chk.expect(kinks * 20 <= checked, fmt("%g of %g entries needed the finer step (limit 5%%)", kinks, checked));
  const double secs = timer.seconds();
  chk.expect(secs < 300.0, fmt("runtime %.1f s >= 300 s", secs));
  std::printf("    %d parameter tensors, %d entries; max rel. error %.3g over smooth entries, raw max %.3g at %s\n",
              tensors, checked, smooth_worst, raw_worst, raw_worst_at.c_str());
  std::printf("    %d entries re-checked at step 1e-6; %.1f s\n", kinks, secs);
  return chk.ok();
}

// ---------------------------------------------------------------------------

struct OverfitRun {
  int epochs = 0;
  double dice = 0.0;
  double accuracy = 0.0;
  model::CheckpointData weights;
};

OverfitRun overfit_once(const train::TrainConfig& cfg, const train::ClipSet& set, bool stop_early, int epochs) {
  auto c = cfg;
  c.epochs = epochs;
  model::FetalNet net(c.net);
  net.init(c.seed);
  OverfitRun r;
  train::fit(
      net, c, set, nullptr,
      [&](const train::EpochLog& e, model::FetalNet&) {
        r.epochs = e.epoch;
        r.dice = e.train->dice;
        r.accuracy = e.train->accuracy;
        if (e.epoch % 10 == 0) std::printf("    epoch %3d  loss %.4f  dice %.3f  accuracy %.3f\n", e.epoch, e.loss,
                                           r.dice, r.accuracy);
        std::fflush(stdout);
      },
      [&](const train::EpochLog& e) { return stop_early && e.train->dice >= 0.90 && e.train->accuracy == 1.0; });
  r.weights = model::snapshot(net);
  return r;
}

bool overfit(const fs::path& work) {
  Timer timer;
  phantom::SuiteOptions so;
  so.size = 64;
  so.clip_len = 3;
  so.noise = 0.1;
  phantom::generate_suite(work / "overfit", 8, {2, 2, 2, 2}, 7, so);
  train::TrainConfig cfg;
  cfg.net = toy(8, 64, 3);
  cfg.learning_rate = 1e-4;
  cfg.batch_size = 1;
  cfg.augment = false;
  cfg.seed = 0;
  const auto set = train::load_clip_set(data::load_manifest(work / "overfit" / "manifest.json"), cfg.net);

  const auto first = overfit_once(cfg, set, true, 200);
  const double train_secs = timer.seconds();
  std::printf("    stopped at epoch %d: training dice %.4f, accuracy %.4f (%.0f s)\n", first.epochs, first.dice,
              first.accuracy, train_secs);
  std::printf("    repeating %d epochs with the same seed\n", first.epochs);
  const auto second = overfit_once(cfg, set, false, first.epochs);
  bool identical = first.weights.arrays.size() == second.weights.arrays.size();
  for (std::size_t k = 0; identical && k < first.weights.arrays.size(); ++k)
    identical = first.weights.arrays[k].values == second.weights.arrays[k].values;

  Checks chk;
  chk.expect(first.dice >= 0.90, fmt("training dice %.4f < 0.90", first.dice));
  chk.expect(first.accuracy == 1.0, fmt("training accuracy %.4f != 1", first.accuracy));
  chk.expect(train_secs < 1800.0, fmt("training took %.0f s >= 1800 s", train_secs));
  chk.expect(identical && second.dice == first.dice, "rerun under the same seed differs");
  std::printf("    rerun bit-identical: %s; total %.0f s\n", identical ? "yes" : "no", timer.seconds());
  return chk.ok();
}

// ---------------------------------------------------------------------------

bool measurement_oracle() {
  Timer timer;
  std::mt19937_64 rng(2024);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  Checks chk;
  std::array<double, 4> worst{};  // hc, bpd, ac, fl relative error
  int n = 0;
  for (int i = 0; i < 60; ++i) {
    phantom::PhantomSpec spec;
    spec.label = std::array{ClassLabel::Head, ClassLabel::Abdomen, ClassLabel::Femur}[i % 3];
    spec.spacing = uni(0.1, 0.4);
    spec.clip_len = 1;
    spec.noise = 0.0;
    double extent = 0.0;
    if (spec.label == ClassLabel::Femur) {
      const double length = 2.0 * uni(20.0, 80.0);
      const double width = length / uni(1.0, 3.0);
      spec.shape = phantom::CapsuleShape{length, width, 0.0, 0.0, uni(0.0, kPi)};
      extent = length / 2.0;
    } else {
      const double a = uni(20.0, 80.0);
      const double b = a / uni(1.0, std::min(3.0, a / 20.0));
      spec.shape = phantom::EllipseShape{a, b, 0.0, 0.0, uni(0.0, kPi)};
      extent = a;
    }
    spec.size = static_cast<int>(std::ceil(2.0 * extent)) + 16;
    const double slack = 4.0;
    std::visit(
        [&](auto& s) {
          if constexpr (!std::is_same_v<std::decay_t<decltype(s)>, std::monostate>) {
            s.cx = spec.size / 2.0 + uni(-slack, slack);
            s.cy = spec.size / 2.0 + uni(-slack, slack);
          }
        },
        spec.shape);
    const auto clip = phantom::generate(spec);
    const auto& g = clip.ground_truth[0];
    const auto m = fg::measure(spec.label, {clean(clip.masks[0]), spec.spacing});
    ++n;
    auto rel = [](std::optional<double> got, double want) { return got ? std::abs(*got / want - 1.0) : INFINITY; };
    const std::string id = "geometry " + std::to_string(i);
    if (g.hc_mm) {
      const double e = rel(m.hc_mm, *g.hc_mm), eb = rel(m.bpd_mm, *g.bpd_mm);
      worst[0] = std::max(worst[0], e);
      worst[1] = std::max(worst[1], eb);
      chk.expect(e <= 0.01, id + fmt(" HC error %.3f%%", 100 * e));
      chk.expect(eb <= 0.02, id + fmt(" BPD error %.3f%%", 100 * eb));
    }
    if (g.ac_mm) {
      const double e = rel(m.ac_mm, *g.ac_mm);
      worst[2] = std::max(worst[2], e);
      chk.expect(e <= 0.01, id + fmt(" AC error %.3f%%", 100 * e));
    }
    if (g.fl_mm) {
      const double e = rel(m.fl_mm, *g.fl_mm);
      worst[3] = std::max(worst[3], e);
      const double abs_err = m.fl_mm ? std::abs(*m.fl_mm - *g.fl_mm) : INFINITY;
      chk.expect(e <= 0.02 || abs_err <= spec.spacing, id + fmt(" FL error %.3f%% (%.3f mm)", 100 * e, abs_err));
    }
  }
  const double secs = timer.seconds();
  chk.expect(secs < 120.0, fmt("runtime %.1f s >= 120 s", secs));
  std::printf("    %d geometries; worst error HC %.3f%%, BPD %.3f%%, AC %.3f%%", n, 100 * worst[0], 100 * worst[1],
              100 * worst[2]);
  std::printf(", FL %.3f%%; %.1f s\n", 100 * worst[3], secs);
  return chk.ok();
}

// ---------------------------------------------------------------------------

bool geometry_oracles() {
  Checks chk;
  std::mt19937_64 rng(99);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  double fit_worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const double a = uni(5.0, 200.0), b = a / uni(1.05, 4.0), th = uni(0.0, kPi);
    const double cx = uni(-300, 300), cy = uni(-300, 300);
    std::vector<fg::Point> pts;
    const int k = 5 + trial % 60;
    for (int i = 0; i < k; ++i) {
      const double t = 2 * kPi * i / k + 0.1;
      const double u = a * std::cos(t), v = b * std::sin(t);
      pts.push_back({cx + u * std::cos(th) - v * std::sin(th), cy + u * std::sin(th) + v * std::cos(th)});
    }
    const auto e = fg::fit_ellipse(pts);
    const double dth = std::abs(std::remainder(e.angle - th, kPi));
    const double err = std::max({std::abs(e.semi_major / a - 1), std::abs(e.semi_minor / b - 1),
                                 std::hypot(e.center.x - cx, e.center.y - cy) / a, dth});
    fit_worst = std::max(fit_worst, err);
    chk.expect(err < 1e-6, fmt("fit_ellipse trial %g error %.3g", trial, err));
  }

  double perim_worst = 0.0;
  for (double ratio = 1.0; ratio <= 4.0 + 1e-12; ratio += 0.05) {
    const double a = 50.0 * ratio, b = 50.0;
    const double exact = testing::ellipse_arc_length(a, b);
    const double err = std::abs(fg::ellipse_perimeter(a, b) / exact - 1.0);
    perim_worst = std::max(perim_worst, err);
    chk.expect(err < 5e-4, fmt("perimeter a/b=%.2f error %.4f%%", ratio, 100 * err));
  }

  int rdp_checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double eps = uni(0.05, 6.0);
    std::vector<fg::Point> pts(3 + trial % 80);
    if (trial % 2 == 0) {
      for (auto& p : pts) p = {uni(-50, 50), uni(-50, 50)};
      const auto out = fg::rdp(pts, eps);
      chk.expect(out.front() == pts.front() && out.back() == pts.back(), "rdp endpoints moved");
      chk.expect(fg::max_deviation(pts, out, false) <= eps + 1e-9, fmt("rdp open containment, eps %.3f", eps));
    } else {
      // closed star-shaped contour
      const int k = static_cast<int>(pts.size());
      for (int i = 0; i < k; ++i) {
        const double t = 2 * kPi * i / k, r = uni(10, 40);
        pts[static_cast<std::size_t>(i)] = {r * std::cos(t), r * std::sin(t)};
      }
      const auto out = fg::rdp_closed(pts, eps);
      chk.expect(fg::max_deviation(pts, out, true) <= eps + 1e-9, fmt("rdp closed containment, eps %.3f", eps));
    }
    ++rdp_checked;
  }

  int dsc_exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Mask a(8, 8), b(8, 8);
    const unsigned pa = 1 + trial % 5, pb = 1 + (trial / 5) % 5;
    for (auto& v : a) v = rng() % pa == 0;
    for (auto& v : b) v = rng() % pb == 0;
    const auto o = metrics::overlap(a, b);
    // 2I/(|A|+|B|) == 2(I/U)/(1+I/U) <=> |A|+|B| == U+I, in integers
    const bool identity = o.pred_area + o.gt_area == o.union_area() + o.intersection;
    const bool value = std::abs(o.dice() - 2 * o.iou() / (1 + o.iou())) <= 4e-16;
    chk.expect(identity && value, fmt("dsc/iou trial %g: dice %.17g iou %.17g", trial, o.dice(), o.iou()));
    dsc_exact += identity && value;
  }
  std::printf("    fit_ellipse worst relative error %.3g over 200 ellipses\n", fit_worst);
  std::printf("    perimeter worst error %.4f%% for a/b in [1,4]\n", 100 * perim_worst);
  std::printf("    rdp containment held on %d contours; dsc identity on %d of 1000 pairs\n", rdp_checked, dsc_exact);
  return chk.ok();
}

// ---------------------------------------------------------------------------

bool ablation_trend(const fs::path& work) {
  Timer timer;
  phantom::SuiteOptions so;
  so.size = 32;
  so.clip_len = 2;
  so.noise = 0.1;
  phantom::generate_suite(work / "ablation_train", 16, {4, 4, 4, 4}, 11, so);
  phantom::generate_suite(work / "ablation_val", 8, {2, 2, 2, 2}, 12, so);
  train::TrainConfig cfg;
  cfg.net = toy(4, 32, 2);
  cfg.batch_size = 2;
  cfg.epochs = 20;
  cfg.learning_rate = 1e-3;
  cfg.augment = false;
  const auto tr = train::load_clip_set(data::load_manifest(work / "ablation_train" / "manifest.json"), cfg.net);
  const auto va = train::load_clip_set(data::load_manifest(work / "ablation_val" / "manifest.json"), cfg.net);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(s);
  const auto& v = train::ablation_variants();
  const auto rows = train::run_ablation(cfg, tr, va, seeds, {v[1], v[4]});

  std::vector<double> base, full;
  for (const auto& r : rows) (r.variant == v[1].name ? base : full).push_back(r.report.dice);
  auto line = [](const char* name, const std::vector<double>& d) {
    std::printf("    %-16s", name);
    for (double x : d) std::printf(" %.3f", x);
    std::printf("\n");
  };
  line(v[1].name.c_str(), base);
  line(v[4].name.c_str(), full);
  int wins = 0;
  for (std::size_t i = 0; i < base.size(); ++i) wins += full[i] >= base[i];
  const double mb = train::median(base), mf = train::median(full);
  std::printf("    median validation dice: %s %.4f, %s %.4f; full >= base on %d of 20 seeds; %.0f s\n",
              v[1].name.c_str(), mb, v[4].name.c_str(), mf, wins, timer.seconds());
  return mf >= mb;
}

// ---------------------------------------------------------------------------

bool invariance_suite() {
  Checks chk;

  // probability ranges, with inputs far outside [0,1] to push the gates
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    model::FetalNet net(toy(4, 32, 2));
    net.init(seed);
    randomize_non_weights(net, seed);
    Tensor frames = random_frames(4, 32, seed);
    frames *= seed % 2 ? 50.0 : 1.0;
    std::mt19937_64 rng(seed);
    model::Tape tape;
    const auto out = net.forward(frames, 2, Context{seed > 2, &rng}, &tape);
    auto in_unit = [](const Tensor& t) {
      for (double v : t.values())
        if (!(v >= 0.0 && v <= 1.0)) return false;
      return true;
    };
    chk.expect(in_unit(out.seg_prob) && in_unit(out.side_prob), "segmentation probability outside [0,1]");
    for (const auto& ag : tape.ag) chk.expect(in_unit(ag.alpha), "attention coefficient outside [0,1]");
    for (const auto& s : tape.lstm)
      chk.expect(in_unit(s.i) && in_unit(s.f) && in_unit(s.o), "ConvLSTM gate outside [0,1]");
  }

  // causality: the first k outputs of a clip do not depend on later frames
  {
    model::FetalNet net(toy(4, 32, 5));
    net.init(7);
    randomize_non_weights(net, 7);
    const Tensor clip = random_frames(5, 32, 7);
    const auto full = net.forward_clip(clip, Context{});
    for (int k = 1; k <= 5; ++k) {
      const auto part = net.forward_clip(slice_frames(clip, 0, k), Context{});
      for (int t = 0; t < k; ++t)
        chk.expect(part[t].seg_prob == full[t].seg_prob && part[t].class_logits == full[t].class_logits,
                   fmt("causality broken at k=%g t=%g", k, t));
    }
  }

  // patient-level split disjointness
  {
    data::DatasetManifest m;
    for (int p = 0; p < 37; ++p)
      for (int c = 0; c <= p % 3; ++c) {
        data::ClipEntry e{"p" + std::to_string(p), "c" + std::to_string(p) + "_" + std::to_string(c), 0.2, {}};
        e.frames.push_back({0, "x.png", ClassLabel::Background, std::nullopt});
        m.entries.push_back(e);
      }
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto s = data::make_splits(m, {}, seed);
      std::set<std::string> seen;
      std::size_t clips = 0;
      for (const auto* part : {&s.train, &s.val, &s.test}) {
        clips += part->entries.size();
        for (const auto& id : data::patient_ids(*part))
          chk.expect(seen.insert(id).second, "patient " + id + " in two splits, seed " + std::to_string(seed));
      }
      chk.expect(seen.size() == 37 && clips == m.entries.size(), "split lost patients or clips");
    }
  }

  // augmentation: one draw per clip, applied identically to every frame
  {
    std::vector<Image> frames;
    std::vector<Mask> masks;
    std::vector<ClassLabel> labels;
    for (int t = 0; t < 4; ++t) {
      const Mask m = testing::raster_ellipse(48, 48, 20 + t, 22, 12, 7, 0.5);
      masks.push_back(m);
      frames.push_back(to_image(m));
      labels.push_back(ClassLabel::Abdomen);
    }
    const auto s = data::resize_sample(frames, masks, labels, 0.3, 48);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto a = data::augment_clip(s, seed);
      bool same = true;
      for (const auto& p : a.augment) same = same && p == a.augment[0];
      chk.expect(same, "augmentation parameters differ within a clip");
      for (int t = 0; t < 4; ++t) {
        const auto one = data::apply_augment(train::slice_sample(s, t, 1), a.augment[0]);
        chk.expect(one.masks[0] == a.masks[static_cast<std::size_t>(t)] && one.frame(0) == a.frame(t),
                   fmt("frame %g transformed differently, seed %g", t, static_cast<double>(seed)));
      }
    }
  }

  // measurement equivariance under scale and rotation
  {
    const Mask base = testing::raster_ellipse(220, 220, 109.3, 110.8, 70, 45, 0.7);
    const double hc0 = head_hc(base, 0.15);
    double worst = 0.0;
    for (double factor : {0.25, 0.5, 0.75, 1.5, 2.0}) {
      const int target = static_cast<int>(std::lround(220 * factor));
      const auto s = data::resize_sample({to_image(base)}, {base}, {ClassLabel::Head}, 0.15, target);
      const double e = std::abs(head_hc(s.masks[0], s.spacing[0]) / hc0 - 1.0);
      worst = std::max(worst, e);
      chk.expect(e <= 0.02, fmt("scale %.2f changes HC by %.2f%%", factor, 100 * e));
    }
    for (double deg = 0.0; deg < 180.0; deg += 15.0) {
      const Mask rotated = testing::raster_ellipse(220, 220, 109.3, 110.8, 70, 45, 0.7 + deg * kPi / 180);
      const double e = std::abs(head_hc(rotated, 0.15) / hc0 - 1.0);
      worst = std::max(worst, e);
      chk.expect(e <= 0.02, fmt("rotation %.0f deg changes HC by %.2f%%", deg, 100 * e));
    }
    const auto s = data::resize_sample({to_image(base)}, {base}, {ClassLabel::Head}, 0.15, 220);
    for (double deg : {-15.0, -7.5, 5.0, 12.0}) {
      data::AugmentParams p;
      p.rotation_deg = deg;
      const auto a = data::apply_augment(s, p);
      const double e = std::abs(head_hc(a.masks[0], a.spacing[0]) / hc0 - 1.0);
      worst = std::max(worst, e);
      chk.expect(e <= 0.02, fmt("augment rotation %.1f deg changes HC by %.2f%%", deg, 100 * e));
    }
    std::printf("    measurement equivariance worst HC change %.3f%%\n", 100 * worst);
  }
  std::printf("    %d checks, %d failed\n", chk.total, chk.failed);
  return chk.ok();
}

// ---------------------------------------------------------------------------

bool loss_arithmetic() {
  Checks chk;
  auto near = [&](double got, double want, const char* what) {
    chk.expect(std::abs(got - want) <= 1e-9, std::string(what) + fmt(": got %.15g want %.15g", got, want));
    std::printf("    %-44s %.12f (expected %.12f)\n", what, got, want);
  };
  near(loss::dice_loss(std::vector<double>(16, 1.0), std::vector<double>(16, 0.0)), 1.0 - 1.0 / 17.0,
       "dice_loss ones vs zeros, 4x4");
  near(loss::dice_loss(std::vector<double>(4, 0.5), std::vector<double>(4, 1.0)), 2.0 / 7.0,
       "dice_loss 0.5 vs ones, 2x2");
  near(loss::weighted_ce({0, 0, 0, 0}, ClassLabel::Femur, {}), 0.4 * std::log(4.0), "weighted_ce uniform, Femur");
  near(loss::weighted_ce({10, 0, 0, 0}, ClassLabel::Head, {}), 0.25 * std::log1p(3.0 * std::exp(-10.0)),
       "weighted_ce (10,0,0,0), Head");

  FramePrediction a, b;
  a.seg_prob = Image(2, 2, 0.5);
  a.class_logits = {1, 0, 0, 0};
  b.seg_prob = Image(2, 2, 0.2);
  b.class_logits = {0, 0, 0, 2};
  const std::vector<FrameTarget> targets{{Mask(2, 2, 1), ClassLabel::Head}, {Mask(2, 2, 0), ClassLabel::Background}};
  const std::vector<FramePrediction> preds{a, b};
  const auto terms = loss::total_loss(preds, targets);
  // frame 0 is the only foreground frame; ce averages both frames
  const double dice = 1.0 - (2.0 * 2.0 + 1.0) / (2.0 + 4.0 + 1.0);
  const double ce = 0.5 * (0.25 * (std::log(std::exp(1.0) + 3.0) - 1.0) + 0.1 * (std::log(std::exp(2.0) + 3.0) - 2.0));
  near(terms.total(), dice + ce, "total loss, two-frame clip");
  return chk.ok();
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  const fs::path work = fs::temp_directory_path() / ("fetalnet_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<bool()>>> criteria{
      {"gradient check against central differences", gradient_check},
      {"overfit 8 phantom clips", [&] { return overfit(work); }},
      {"measurement oracle on clean phantoms", measurement_oracle},
      {"geometry unit oracles", geometry_oracles},
      {"ablation trend over 20 seeds", [&] { return ablation_trend(work); }},
      {"invariance suite", invariance_suite},
      {"loss arithmetic", loss_arithmetic},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    std::printf("[%d] %s\n", id, criteria[k].first.c_str());
    std::fflush(stdout);
    bool ok = false;
    try {
      ok = criteria[k].second();
    } catch (const std::exception& e) {
      std::printf("    error: %s\n", e.what());
    }
    std::printf("CRITERION %d %s: %s\n", id, ok ? "PASS" : "FAIL", criteria[k].first.c_str());
    std::fflush(stdout);
    failed += !ok;
  }
  fs::remove_all(work);
  return failed == 0 ? 0 : 1;
}
