#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "fetalnet/model/checkpoint.hpp"
#include "fetalnet/train/adam.hpp"
#include "fetalnet/train/config.hpp"
#include "fetalnet/train/dataset.hpp"
#include "fetalnet/train/evaluate.hpp"
#include "fetalnet/train/objective.hpp"

namespace fetalnet::train {

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss = 0.0;
  double dice_loss = 0.0;
  double ce_loss = 0.0;
  std::optional<metrics::MetricReport> train;
  std::optional<metrics::MetricReport> val;
};

inline nlohmann::ordered_json to_json(const EpochLog& e) {
  nlohmann::ordered_json j;
  j["epoch"] = e.epoch;
  j["loss"] = e.loss;
  j["dice_loss"] = e.dice_loss;
  j["ce_loss"] = e.ce_loss;
  j["train"] = e.train ? metrics::to_json(*e.train) : nlohmann::ordered_json(nullptr);
  j["val"] = e.val ? metrics::to_json(*e.val) : nlohmann::ordered_json(nullptr);
  return j;
}

/// splitmix64 finaliser; derives independent stream seeds from (seed, a, b).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xbf58476d1ce4e5b9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

using EpochCallback = std::function<void(const EpochLog&, model::FetalNet&)>;
/// Returns true to end training after the epoch just logged.
using StopPredicate = std::function<bool(const EpochLog&)>;

/// Deterministic training loop. Clip order is reshuffled every epoch; each
/// clip gets one augmentation draw per epoch.
inline std::vector<EpochLog> fit(model::FetalNet& net, const TrainConfig& cfg, const ClipSet& train_set,
                                 const ClipSet* val_set = nullptr, const EpochCallback& on_epoch = {},
                                 const StopPredicate& stop = {}) {
  if (train_set.windows.empty()) throw DataError("training set is empty");
  Adam opt({cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::mt19937_64 dropout_rng(mix_seed(cfg.seed, 1));
  const auto loss_opt = loss_options_for(cfg.net, cfg.loss_weights);
  std::vector<EpochLog> log;
  std::vector<std::size_t> order(train_set.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 order_rng(mix_seed(cfg.seed, 2, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochLog e;
    e.epoch = epoch;
    double frames_seen = 0.0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t last = std::min(order.size(), first + static_cast<std::size_t>(cfg.batch_size));
      std::vector<data::Sample> augmented;
      augmented.reserve(last - first);
      for (std::size_t i = first; i < last; ++i) {
        const auto& s = train_set.windows[order[i]].sample;
        augmented.push_back(cfg.augment ? data::augment_clip(s, mix_seed(cfg.seed, 3 + order[i],
                                                                          static_cast<std::uint64_t>(epoch)))
                                        : s);
      }
      std::vector<const data::Sample*> clips;
      for (const auto& s : augmented) clips.push_back(&s);
      const auto targets = stack_targets(clips);
      net.zero_grad();
      const nn::Context ctx{true, &dropout_rng, true};
      const auto r = forward_backward(net, stack_frames(clips), static_cast<int>(clips.size()), targets,
                                      loss_opt, ctx);
      opt.step(net);
      const double n = static_cast<double>(targets.size());
      e.loss += r.terms.total() * n;
      e.dice_loss += r.terms.dice * n;
      e.ce_loss += r.terms.ce * n;
      frames_seen += n;
    }
    e.loss /= frames_seen;
    e.dice_loss /= frames_seen;
    e.ce_loss /= frames_seen;
    if (cfg.log_train_metrics) e.train = evaluate(net, train_set).report;
    if (val_set && !val_set->windows.empty()) e.val = evaluate(net, *val_set).report;
    if (on_epoch) on_epoch(e, net);
    log.push_back(std::move(e));
    if (stop && stop(log.back())) break;
  }
  return log;
}

struct RunResult {
  model::FetalNet net;
  std::vector<EpochLog> log;
};

/// Loads data, trains, and writes checkpoint.bin, metrics.jsonl and
/// config.json under cfg.output_dir. All inputs are read and checked before
/// the first step.
inline RunResult run_training(const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto train_manifest = data::load_manifest(cfg.train_manifest);
  const auto train_set = load_clip_set(train_manifest, cfg.net, cfg.letterbox);
  std::optional<ClipSet> val_set;
  if (cfg.val_manifest) val_set = load_clip_set(data::load_manifest(*cfg.val_manifest), cfg.net, cfg.letterbox);

  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream(cfg.output_dir / "config.json") << to_json(cfg).dump(2) << "\n";
  std::ofstream log_file(cfg.output_dir / "metrics.jsonl");
  if (!log_file) throw DataError("cannot write to " + cfg.output_dir.string());

  RunResult r{model::FetalNet(cfg.net), {}};
  r.net.init(cfg.seed);
  r.log = fit(r.net, cfg, train_set, val_set ? &*val_set : nullptr, [&](const EpochLog& e, model::FetalNet& n) {
    log_file << to_json(e).dump() << "\n" << std::flush;
    if (on_epoch) on_epoch(e, n);
  });
  model::save_checkpoint(cfg.output_dir / "checkpoint.bin", r.net,
                         {{"epochs", cfg.epochs}, {"seed", cfg.seed}, {"train_manifest", cfg.train_manifest.string()}});
  return r;
}

}  // namespace fetalnet::train
