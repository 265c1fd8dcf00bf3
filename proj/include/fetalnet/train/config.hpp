#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "fetalnet/core/error.hpp"
#include "fetalnet/loss/loss.hpp"
#include "fetalnet/model/config.hpp"

namespace fetalnet::train {

/// Everything a training run needs. Read from a flat JSON object whose keys
/// are the field names below plus the NetConfig keys.
struct TrainConfig {
  std::filesystem::path train_manifest;
  std::optional<std::filesystem::path> val_manifest;
  std::filesystem::path output_dir = "run";
  double learning_rate = 1e-4;
  double weight_decay = 1e-5;
  int batch_size = 16;  // clips per step
  int epochs = 80;
  std::uint64_t seed = 0;
  bool augment = true;
  bool letterbox = false;
  /// Forward the training set in eval mode after every epoch and log it.
  bool log_train_metrics = true;
  loss::LossWeights loss_weights;
  model::NetConfig net;

  void validate() const {
    if (train_manifest.empty()) throw ConfigError("train_manifest is required");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    loss_weights.validate();
    net.validate();
  }
};

inline const std::set<std::string>& train_config_keys() {
  static const std::set<std::string> keys = {
      "train_manifest", "val_manifest", "output_dir", "learning_rate", "weight_decay",
      "batch_size", "epochs", "seed", "augment", "letterbox", "log_train_metrics", "loss_weights",
      "base_width", "input_size", "clip_len", "num_classes", "dropout_block", "dropout_cls",
      "convlstm_kernel", "classification_branch", "attention_gates", "stacked_module"};
  return keys;
}

/// Relative paths are resolved against `base_dir`. Unknown keys are errors.
inline TrainConfig train_config_from_json(const nlohmann::json& j,
                                          const std::filesystem::path& base_dir = {}) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!train_config_keys().contains(k)) throw ConfigError("unknown config key: " + k);
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
    }
  };
  auto path = [&](const std::string& s) {
    std::filesystem::path p(s);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  std::string s;
  if (j.contains("train_manifest")) {
    get("train_manifest", s);
    c.train_manifest = path(s);
  }
  if (j.contains("val_manifest") && !j.at("val_manifest").is_null()) {
    get("val_manifest", s);
    c.val_manifest = path(s);
  }
  if (j.contains("output_dir")) {
    get("output_dir", s);
    c.output_dir = path(s);
  } else if (!base_dir.empty()) {
    c.output_dir = base_dir / c.output_dir;
  }
  get("learning_rate", c.learning_rate);
  get("weight_decay", c.weight_decay);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("seed", c.seed);
  get("augment", c.augment);
  get("letterbox", c.letterbox);
  get("log_train_metrics", c.log_train_metrics);
  get("loss_weights", c.loss_weights.w);
  c.net = model::net_config_from_json(j, c.net);
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["train_manifest"] = c.train_manifest.string();
  j["val_manifest"] = c.val_manifest ? nlohmann::ordered_json(c.val_manifest->string()) : nullptr;
  j["output_dir"] = c.output_dir.string();
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["augment"] = c.augment;
  j["letterbox"] = c.letterbox;
  j["log_train_metrics"] = c.log_train_metrics;
  j["loss_weights"] = c.loss_weights.w;
  const auto net = model::to_json(c.net);
  for (const auto& [k, v] : net.items()) j[k] = v;
  return j;
}

inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return train_config_from_json(j, path.parent_path());
}

}  // namespace fetalnet::train
