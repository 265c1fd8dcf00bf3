#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fetalnet/data/sample.hpp"
#include "fetalnet/geometry/measure.hpp"
#include "fetalnet/phantom/phantom.hpp"
#include "temp_dir.hpp"

using namespace fetalnet;
using namespace fetalnet::phantom;
using fetalnet::testing::TempDir;

namespace {

geometry::BiometryResult measure_clean(const PhantomClip& clip, int t) {
  const Mask& m = clip.masks[static_cast<std::size_t>(t)];
  Image prob(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) prob(r, c) = m(r, c);
  const Mask cleaned = geometry::postprocess(prob, m.rows(), m.cols());
  return geometry::measure(clip.labels[static_cast<std::size_t>(t)], {cleaned, clip.spacing});
}

}  // namespace

TEST(Phantom, HeadCircleGroundTruth) {
  PhantomSpec spec;
  spec.label = ClassLabel::Head;
  spec.shape = EllipseShape{50, 50, 100, 100, 0};
  spec.size = 200;
  spec.spacing = 0.2;
  spec.clip_len = 2;
  const auto clip = generate(spec);
  ASSERT_EQ(clip.ground_truth.size(), 2u);
  EXPECT_NEAR(*clip.ground_truth[0].hc_mm, 62.83, 0.005);
  EXPECT_NEAR(*clip.ground_truth[0].bpd_mm, 20.0, 1e-12);
  EXPECT_FALSE(clip.ground_truth[0].ac_mm);
  const auto measured = measure_clean(clip, 1);
  EXPECT_NEAR(*measured.hc_mm / *clip.ground_truth[1].hc_mm, 1.0, 0.01);
}

TEST(Phantom, BackgroundRendersNoiseOnly) {
  PhantomSpec spec;
  spec.label = ClassLabel::Background;
  spec.noise = 0.3;
  spec.seed = 4;
  const auto clip = generate(spec);
  ASSERT_EQ(clip.frames.size(), 5u);
  for (std::size_t t = 0; t < 5; ++t) {
    EXPECT_TRUE(clip.masks[t].empty());
    EXPECT_EQ(clip.labels[t], ClassLabel::Background);
    EXPECT_FALSE(clip.ground_truth[t].has_any());
  }
  // multiplicative speckle: mean stays at the tissue level, std = sigma * level
  double mean = 0, var = 0;
  const auto& f = clip.frames[0];
  for (double v : f) mean += v / static_cast<double>(f.size());
  for (double v : f) var += (v - mean) * (v - mean) / static_cast<double>(f.size());
  EXPECT_NEAR(mean, kTissue, 0.01);
  EXPECT_NEAR(std::sqrt(var), 0.3 * kTissue, 0.005);
}

TEST(Phantom, Deterministic) {
  const auto spec = random_spec(ClassLabel::Femur, 64, 4, 0.25, 0.2, 99);
  const auto a = generate(spec);
  const auto b = generate(spec);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.masks, b.masks);
  const auto c = generate(random_spec(ClassLabel::Femur, 64, 4, 0.25, 0.2, 100));
  EXPECT_NE(a.frames, c.frames);
}

TEST(Phantom, MasksAreCleanAndDrift) {
  auto spec = random_spec(ClassLabel::Abdomen, 64, 3, 0.3, 0.5, 7);
  spec.drift = {1.0, 0.0};
  auto& e = std::get<EllipseShape>(spec.shape);
  e.cx = 30;
  const auto clip = generate(spec);
  // mask pixels are exactly the ellipse interior, unaffected by speckle
  for (int t = 0; t < 3; ++t)
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        EllipseShape moved = e;
        moved.cx += t;
        EXPECT_EQ(clip.masks[t](y, x), ellipse_rho2(moved, x, y) <= 1.0 ? 1 : 0);
      }
}

TEST(Phantom, GeometryOutsideFrameRejected) {
  PhantomSpec spec;
  spec.label = ClassLabel::Head;
  spec.shape = EllipseShape{20, 15, 30, 32, 0};
  spec.size = 64;
  EXPECT_NO_THROW(generate(spec));
  spec.drift = {4.0, 0.0};
  EXPECT_THROW(generate(spec), SpecError);
  spec.drift = {0.0, 0.0};
  spec.shape = CapsuleShape{20, 5, 30, 30, 0};
  EXPECT_THROW(generate(spec), SpecError);
  spec.label = ClassLabel::Femur;
  EXPECT_NO_THROW(generate(spec));
  spec.shape = CapsuleShape{4, 5, 30, 30, 0};
  EXPECT_THROW(generate(spec), SpecError);
  spec.noise = -1;
  EXPECT_THROW(check_spec(spec), SpecError);
}

TEST(Phantom, RandomSpecsAlwaysFit) {
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    for (auto label : kAllLabels) EXPECT_NO_THROW(generate(random_spec(label, 64, 5, 0.2, 0.1, seed)));
}

TEST(Phantom, OracleClosure) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (auto label : {ClassLabel::Head, ClassLabel::Abdomen, ClassLabel::Femur}) {
      const auto clip = generate(random_spec(label, 160, 1, 0.25, 0.0, seed));
      const auto m = measure_clean(clip, 0);
      const auto& g = clip.ground_truth[0];
      if (g.hc_mm) {
        EXPECT_NEAR(*m.hc_mm / *g.hc_mm, 1.0, 0.01) << seed;
      }
      if (g.bpd_mm) {
        EXPECT_NEAR(*m.bpd_mm / *g.bpd_mm, 1.0, 0.02) << seed;
      }
      if (g.ac_mm) {
        EXPECT_NEAR(*m.ac_mm / *g.ac_mm, 1.0, 0.01) << seed;
      }
      if (g.fl_mm) {
        EXPECT_NEAR(*m.fl_mm / *g.fl_mm, 1.0, 0.02) << seed;
      }
    }
  }
}

TEST(Phantom, NoiseMonotonicityOnAverage) {
  // Thresholding the noisy frame itself: more speckle, more error on average.
  const std::array<double, 4> sigmas{0.0, 0.15, 0.3, 0.6};
  std::array<double, 4> mean_err{};
  for (std::uint64_t seed = 0; seed < 24; ++seed) {
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
      auto spec = random_spec(ClassLabel::Femur, 96, 1, 0.2, sigmas[k], seed);
      const auto clip = generate(spec);
      const Mask m = geometry::postprocess(clip.frames[0], 96, 96);
      const auto r = geometry::measure(ClassLabel::Femur, {m, spec.spacing});
      const double truth = *clip.ground_truth[0].fl_mm;
      mean_err[k] += (r.fl_mm ? std::abs(*r.fl_mm - truth) / truth : 1.0) / 24.0;
    }
  }
  for (std::size_t k = 1; k < sigmas.size(); ++k)
    EXPECT_GE(mean_err[k] + 1e-12, mean_err[k - 1]) << "sigma " << sigmas[k];
  EXPECT_GT(mean_err[3], mean_err[0]);
}

TEST(Suite, EightClipsRoundTrip) {
  TempDir dir;
  const auto suite = generate_suite(dir.path(), 8, {2, 2, 2, 2}, 5);
  ASSERT_EQ(suite.manifest.entries.size(), 8u);
  const auto loaded = data::load_manifest(dir / "manifest.json");
  EXPECT_EQ(loaded.entries, suite.manifest.entries);
  std::array<int, 4> per_class{};
  for (const auto& e : loaded.entries) ++per_class[index_of(e.frames[0].label)];
  EXPECT_EQ(per_class, (std::array<int, 4>{2, 2, 2, 2}));
  const auto truth = load_ground_truth(dir.path());
  ASSERT_EQ(truth.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& e = loaded.entries[i];
    const auto& g = truth.at(e.clip_id);
    ASSERT_EQ(g.size(), e.frames.size());
    EXPECT_TRUE(geometry::fields_match_label(g[0]));
    EXPECT_EQ(g[0].label, e.frames[0].label);
  }
  // frames read back equal the rendered frames up to 16-bit quantisation
  const auto clip = generate(suite.specs[0]);
  const auto s = data::load_sample(loaded, 0, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) EXPECT_NEAR(s.frames.at(0, 0, y, x), clip.frames[0](y, x), 0.5 / 65535 + 1e-12);
}

TEST(Suite, DeterministicBytesAndMix) {
  TempDir a, b;
  generate_suite(a.path(), 6, kDefaultMix, 11);
  generate_suite(b.path(), 6, kDefaultMix, 11);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), a.path());
    std::ifstream fa(entry.path(), std::ios::binary), fb(b.path() / rel, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {});
    const std::string sb((std::istreambuf_iterator<char>(fb)), {});
    EXPECT_EQ(sa, sb) << rel;
  }
  const auto counts = class_counts(20, kDefaultMix);
  EXPECT_EQ(counts[0] + counts[1] + counts[2] + counts[3], 20);
  EXPECT_GT(counts[3], counts[0]);
  EXPECT_EQ(class_counts(8, {2, 2, 2, 2}), (std::array<int, 4>{2, 2, 2, 2}));
}
