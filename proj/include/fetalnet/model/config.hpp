#pragma once

#include <string>

#include <json.hpp>

#include "fetalnet/core/class_label.hpp"
#include "fetalnet/core/error.hpp"

namespace fetalnet::model {

/// Architecture hyper-parameters. The three component flags select the
/// ablation variant and change the parameter set, so they live here and are
/// embedded in checkpoints together with the widths.
struct NetConfig {
  int base_width = 64;
  int input_size = 224;
  int clip_len = 5;
  int num_classes = kNumClasses;
  double dropout_block = 0.2;
  double dropout_cls = 0.4;
  int convlstm_kernel = 3;
  bool classification_branch = true;
  bool attention_gates = true;
  bool stacked_module = true;

  /// Spatial size of the ConvLSTM grid after four 2x poolings.
  int bottleneck_size() const { return input_size / 16; }

  void validate() const {
    if (base_width < 1) throw ConfigError("base_width must be >= 1");
    if (input_size < 16 || input_size % 16 != 0)
      throw ConfigError("input_size must be a positive multiple of 16, got " +
                        std::to_string(input_size));
    if (clip_len < 1) throw ConfigError("clip_len must be >= 1");
    if (num_classes != kNumClasses) throw ConfigError("num_classes must be 4");
    if (!(dropout_block >= 0.0 && dropout_block < 1.0))
      throw ConfigError("dropout_block must be in [0,1)");
    if (!(dropout_cls >= 0.0 && dropout_cls < 1.0)) throw ConfigError("dropout_cls must be in [0,1)");
    if (convlstm_kernel < 1 || convlstm_kernel % 2 == 0)
      throw ConfigError("convlstm_kernel must be a positive odd integer");
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

inline nlohmann::ordered_json to_json(const NetConfig& c) {
  return {{"base_width", c.base_width},
          {"input_size", c.input_size},
          {"clip_len", c.clip_len},
          {"num_classes", c.num_classes},
          {"dropout_block", c.dropout_block},
          {"dropout_cls", c.dropout_cls},
          {"convlstm_kernel", c.convlstm_kernel},
          {"classification_branch", c.classification_branch},
          {"attention_gates", c.attention_gates},
          {"stacked_module", c.stacked_module}};
}

/// Reads the keys that are present; missing keys keep their defaults.
inline NetConfig net_config_from_json(const nlohmann::json& j, NetConfig c = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) {
      try {
        j.at(key).get_to(field);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for ") + key + ": " + e.what());
      }
    }
  };
  get("base_width", c.base_width);
  get("input_size", c.input_size);
  get("clip_len", c.clip_len);
  get("num_classes", c.num_classes);
  get("dropout_block", c.dropout_block);
  get("dropout_cls", c.dropout_cls);
  get("convlstm_kernel", c.convlstm_kernel);
  get("classification_branch", c.classification_branch);
  get("attention_gates", c.attention_gates);
  get("stacked_module", c.stacked_module);
  return c;
}

}  // namespace fetalnet::model
