#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetalnet/data/overlay.hpp"
#include "fetalnet/data/splits.hpp"
#include "fetalnet/phantom/phantom.hpp"
#include "fetalnet/train/ablation.hpp"

namespace fetalnet::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDataError = 3, kCheckpointError = 4 };

/// Maps the library's error types onto process exit codes.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const CheckpointMismatch*>(&e)) return kCheckpointError;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const InvalidInput*>(&e) ||
      dynamic_cast<const SpecError*>(&e))
    return kDataError;
  return kFailure;
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  fs::path config;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> output_dir;
  bool quiet = false;
};

inline int cmd_train(const TrainArgs& a) {
  auto cfg = train::load_train_config(a.config);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  if (a.output_dir) cfg.output_dir = *a.output_dir;
  cfg.validate();
  train::run_training(cfg, [&](const train::EpochLog& e, model::FetalNet&) {
    if (a.quiet) return;
    std::fprintf(stderr, "epoch %d loss %.5f dice_loss %.5f ce %.5f", e.epoch, e.loss, e.dice_loss, e.ce_loss);
    if (e.train) std::fprintf(stderr, " | train dice %.4f acc %.4f", e.train->dice, e.train->accuracy);
    if (e.val) std::fprintf(stderr, " | val dice %.4f acc %.4f", e.val->dice, e.val->accuracy);
    std::fprintf(stderr, "\n");
  });
  std::cout << (cfg.output_dir / "checkpoint.bin").string() << "\n";
  return kOk;
}

// --- eval ---------------------------------------------------------------------

struct EvalArgs {
  fs::path checkpoint;
  fs::path manifest;
  std::optional<fs::path> json_out;
  std::optional<fs::path> csv_out;
  std::optional<fs::path> frames_out;
  bool letterbox = false;
};

inline nlohmann::ordered_json frame_records_json(const std::vector<train::FrameRecord>& frames) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& f : frames) {
    const std::string id = f.clip_id + "/" + std::to_string(f.frame);
    nlohmann::ordered_json j;
    j["frame_id"] = id;
    j["true_label"] = std::string(to_string(f.truth));
    j["measured"] = geometry::to_json(f.measured, id);
    j["reference"] = geometry::to_json(f.reference, id);
    out.push_back(std::move(j));
  }
  return out;
}

inline int cmd_eval(const EvalArgs& a) {
  auto net = model::load_checkpoint(a.checkpoint);
  const auto set = train::load_clip_set(data::load_manifest(a.manifest), net.config(), a.letterbox);
  const auto ev = train::evaluate(net, set);
  const auto j = metrics::to_json(ev.report);
  std::cout << j.dump(2) << "\n";
  if (a.json_out) write_text(*a.json_out, j.dump(2) + "\n");
  if (a.csv_out) write_text(*a.csv_out, metrics::csv_header() + "\n" + metrics::csv_row(ev.report) + "\n");
  if (a.frames_out) write_text(*a.frames_out, frame_records_json(ev.frames).dump(2) + "\n");
  return kOk;
}

// --- infer --------------------------------------------------------------------

struct InferArgs {
  fs::path checkpoint;
  std::optional<fs::path> clip_dir;
  std::optional<fs::path> manifest;
  std::optional<std::string> clip_id;
  fs::path out_dir;
  std::optional<double> spacing;
  bool letterbox = false;
};

/// Frames of one clip plus whatever annotations came with them.
struct InferClip {
  std::string id;
  std::vector<fs::path> frames;
  std::vector<std::optional<fs::path>> masks;
  std::vector<std::optional<ClassLabel>> labels;
  double spacing = 0.0;
};

/// A clip directory holds clip.json ({pixel_spacing_mm, frames: [{path,
/// mask?, label?}]}) or just PNG frames taken in name order.
inline InferClip read_clip_dir(const fs::path& dir, std::optional<double> spacing) {
  if (!fs::is_directory(dir)) throw DataError("clip directory " + dir.string() + " does not exist");
  InferClip c;
  c.id = dir.filename().string();
  const fs::path meta = dir / "clip.json";
  if (fs::exists(meta)) {
    nlohmann::json j;
    try {
      std::ifstream is(meta);
      j = nlohmann::json::parse(is);
      if (j.contains("pixel_spacing_mm")) c.spacing = j.at("pixel_spacing_mm").get<double>();
      for (const auto& f : j.at("frames")) {
        c.frames.push_back(dir / f.at("path").get<std::string>());
        c.masks.push_back(f.contains("mask") && !f.at("mask").is_null()
                              ? std::optional<fs::path>(dir / f.at("mask").get<std::string>())
                              : std::nullopt);
        std::optional<ClassLabel> label;
        if (f.contains("label")) {
          label = parse_label(f.at("label").get<std::string>());
          if (!label) throw DataError("clip.json: unknown label " + f.at("label").dump());
        }
        c.labels.push_back(label);
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError("bad clip.json: " + std::string(e.what()));
    }
  } else {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") c.frames.push_back(e.path());
    std::sort(c.frames.begin(), c.frames.end());
    c.masks.assign(c.frames.size(), std::nullopt);
    c.labels.assign(c.frames.size(), std::nullopt);
  }
  if (spacing) c.spacing = *spacing;
  if (c.frames.empty()) throw DataError("clip " + dir.string() + " has no frames");
  if (!(c.spacing > 0.0)) throw DataError("pixel spacing missing: give --spacing or pixel_spacing_mm in clip.json");
  return c;
}

inline InferClip clip_from_manifest(const fs::path& manifest, const std::string& clip_id) {
  const auto m = data::load_manifest(manifest);
  for (const auto& e : m.entries) {
    if (e.clip_id != clip_id) continue;
    InferClip c;
    c.id = clip_id;
    c.spacing = e.pixel_spacing_mm;
    for (const auto& f : e.frames) {
      c.frames.push_back(m.resolve(f.path));
      c.masks.push_back(f.mask ? std::optional<fs::path>(m.resolve(*f.mask)) : std::nullopt);
      c.labels.push_back(f.label);
    }
    return c;
  }
  throw DataError("clip " + clip_id + " not found in " + manifest.string());
}

struct InferredFrame {
  std::string frame_id;
  geometry::BiometryResult result;
};

inline std::vector<InferredFrame> run_inference(model::FetalNet& net, const InferClip& clip,
                                                const fs::path& out_dir, bool letterbox) {
  const bool has_cls = net.config().classification_branch;
  std::vector<Image> frames;
  std::vector<Mask> masks;
  std::vector<ClassLabel> labels;
  for (std::size_t t = 0; t < clip.frames.size(); ++t) {
    frames.push_back(data::read_gray(clip.frames[t]));
    masks.push_back(clip.masks[t] ? data::read_mask(*clip.masks[t]) : Mask());
    if (!has_cls && !clip.labels[t]) {
      throw DataError("checkpoint has no classification branch; frame labels must be supplied");
    }
    labels.push_back(clip.labels[t].value_or(ClassLabel::Background));
  }
  // labels only matter to resize_sample for mask handling
  const auto sample = data::resize_sample(frames, masks, labels, clip.spacing, net.config().input_size, letterbox);
  const auto preds = net.forward_clip(sample.frames, nn::Context{false, nullptr, false});
  fs::create_directories(out_dir);
  std::vector<InferredFrame> out;
  for (std::size_t t = 0; t < preds.size(); ++t) {
    const ClassLabel label = has_cls ? preds[t].predicted_label() : labels[t];
    const Image full = data::to_original(preds[t].seg_prob, sample.geometry);
    const Mask cleaned = geometry::postprocess(full, sample.geometry.orig_rows, sample.geometry.orig_cols);
    geometry::MeasureTrace trace;
    auto r = geometry::measure(label, {cleaned, clip.spacing}, {}, &trace);
    const std::string stem = clip.frames[t].stem().string();
    auto rgb = data::to_rgb(frames[t]);
    if (!masks[t].empty()) data::draw_mask_outline(rgb, masks[t], data::kTruthColor);
    if (is_foreground(label)) data::draw_trace(rgb, trace, data::kPredictionColor);
    data::write_rgb(out_dir / (stem + "_overlay.png"), rgb);
    const std::string id = clip.id + "/" + std::to_string(t);
    write_text(out_dir / (stem + ".json"), geometry::to_json(r, id).dump(2) + "\n");
    out.push_back({id, std::move(r)});
  }
  auto all = nlohmann::ordered_json::array();
  for (const auto& f : out) all.push_back(geometry::to_json(f.result, f.frame_id));
  write_text(out_dir / "results.json", all.dump(2) + "\n");
  return out;
}

inline int cmd_infer(const InferArgs& a) {
  auto net = model::load_checkpoint(a.checkpoint);
  InferClip clip;
  if (a.manifest) {
    if (!a.clip_id) throw ConfigError("--manifest needs --clip-id");
    clip = clip_from_manifest(*a.manifest, *a.clip_id);
    if (a.spacing) clip.spacing = *a.spacing;
  } else if (a.clip_dir) {
    clip = read_clip_dir(*a.clip_dir, a.spacing);
  } else {
    throw ConfigError("infer needs --clip or --manifest/--clip-id");
  }
  const auto frames = run_inference(net, clip, a.out_dir, a.letterbox);
  auto all = nlohmann::ordered_json::array();
  for (const auto& f : frames) all.push_back(geometry::to_json(f.result, f.frame_id));
  std::cout << all.dump(2) << "\n";
  return kOk;
}

// --- measure ------------------------------------------------------------------

struct MeasureArgs {
  fs::path mask;
  std::string label;
  double spacing = 0.0;
  bool probability = false;
  std::string frame_id = "frame";
  std::optional<fs::path> overlay;
};

inline int cmd_measure(const MeasureArgs& a) {
  const auto label = parse_label(a.label);
  if (!label) throw ConfigError("unknown label " + a.label + " (Head, Abdomen, Femur, Background)");
  if (!(a.spacing > 0.0)) throw ConfigError("--spacing must be positive");
  const Image img = data::read_gray(a.mask);
  Mask m;
  if (a.probability) {
    m = geometry::postprocess(img, img.rows(), img.cols());
  } else {
    m = Mask(img.rows(), img.cols());
    for (std::size_t i = 0; i < img.size(); ++i) m.data()[i] = img.data()[i] > 0.5 ? 1 : 0;
  }
  geometry::MeasureTrace trace;
  const auto r = geometry::measure(*label, {m, a.spacing}, {}, &trace);
  if (a.overlay) {
    auto rgb = data::to_rgb(img);
    data::draw_trace(rgb, trace, data::kPredictionColor);
    data::write_rgb(*a.overlay, rgb);
  }
  std::cout << geometry::to_json(r, a.frame_id).dump(2) << "\n";
  return kOk;
}

// --- ablate -------------------------------------------------------------------

struct AblateArgs {
  fs::path config;
  int seeds = 1;
  std::optional<fs::path> csv_out;
  std::optional<int> epochs;
};

inline int cmd_ablate(const AblateArgs& a) {
  auto cfg = train::load_train_config(a.config);
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seeds < 1) throw ConfigError("--seeds must be >= 1");
  cfg.validate();
  const auto train_set = train::load_clip_set(data::load_manifest(cfg.train_manifest), cfg.net, cfg.letterbox);
  const auto eval_set = cfg.val_manifest
                            ? train::load_clip_set(data::load_manifest(*cfg.val_manifest), cfg.net, cfg.letterbox)
                            : train_set;
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < a.seeds; ++k) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(k));
  const auto& v = train::ablation_variants();
  const auto rows = train::run_ablation(cfg, train_set, eval_set, seeds, {v.begin(), v.end()});
  const auto csv = train::ablation_csv(rows);
  std::cout << csv;
  write_text(a.csv_out ? *a.csv_out : cfg.output_dir / "ablation.csv", csv);
  return kOk;
}

// --- synth --------------------------------------------------------------------

struct SynthArgs {
  fs::path out_dir;
  int clips = 20;
  std::uint64_t seed = 0;
  phantom::SuiteOptions options;
  std::vector<double> mix{phantom::kDefaultMix.begin(), phantom::kDefaultMix.end()};
  bool split = false;
};

inline int cmd_synth(const SynthArgs& a) {
  if (a.mix.size() != 4) throw ConfigError("--mix needs four weights (Head, Abdomen, Femur, Background)");
  const std::array<double, 4> mix{a.mix[0], a.mix[1], a.mix[2], a.mix[3]};
  const auto suite = phantom::generate_suite(a.out_dir, a.clips, mix, a.seed, a.options);
  if (a.split) {
    const auto s = data::make_splits(suite.manifest, {}, a.seed);
    data::save_manifest(a.out_dir / "train.json", s.train);
    data::save_manifest(a.out_dir / "val.json", s.val);
    data::save_manifest(a.out_dir / "test.json", s.test);
  }
  std::cout << (a.out_dir / "manifest.json").string() << "\n";
  return kOk;
}

}  // namespace fetalnet::cli
