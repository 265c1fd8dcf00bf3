#pragma once

#include <algorithm>
#include <array>
#include <sstream>
#include <string>
#include <vector>

#include "fetalnet/train/trainer.hpp"

namespace fetalnet::train {

struct Variant {
  std::string name;
  bool classification_branch;
  bool attention_gates;
  bool stacked_module;
};

/// The five rows of the component study, smallest first.
inline const std::array<Variant, 5>& ablation_variants() {
  static const std::array<Variant, 5> v{{{"U-Net", false, false, false},
                                         {"U-Net+cls", true, false, false},
                                         {"U-Net+cls+AG", true, true, false},
                                         {"U-Net+cls+SM", true, false, true},
                                         {"U-Net+cls+AG+SM", true, true, true}}};
  return v;
}

inline model::NetConfig with_variant(model::NetConfig c, const Variant& v) {
  c.classification_branch = v.classification_branch;
  c.attention_gates = v.attention_gates;
  c.stacked_module = v.stacked_module;
  return c;
}

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  metrics::MetricReport report;
};

/// Trains every selected variant for every seed on the same data and
/// schedule and scores it on `eval_set`.
inline std::vector<AblationRow> run_ablation(const TrainConfig& base, const ClipSet& train_set,
                                             const ClipSet& eval_set,
                                             const std::vector<std::uint64_t>& seeds,
                                             const std::vector<Variant>& variants) {
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    for (const auto seed : seeds) {
      TrainConfig cfg = base;
      cfg.net = with_variant(base.net, v);
      cfg.seed = seed;
      cfg.log_train_metrics = false;
      model::FetalNet net(cfg.net);
      net.init(seed);
      fit(net, cfg, train_set);
      rows.push_back({v.name, seed, evaluate(net, eval_set).report});
    }
  }
  return rows;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// variant,seed,iou,dice,accuracy; with several seeds a "median" row per
/// variant follows its seed rows.
inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "variant,seed,iou,dice,accuracy\n";
  std::vector<std::string> order;
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), r.variant) == order.end()) order.push_back(r.variant);
  for (const auto& name : order) {
    std::vector<double> iou, dice, acc;
    for (const auto& r : rows) {
      if (r.variant != name) continue;
      os << r.variant << "," << r.seed << "," << r.report.iou << "," << r.report.dice << ","
         << r.report.accuracy << "\n";
      iou.push_back(r.report.iou);
      dice.push_back(r.report.dice);
      acc.push_back(r.report.accuracy);
    }
    if (iou.size() > 1)
      os << name << ",median," << median(iou) << "," << median(dice) << "," << median(acc) << "\n";
  }
  return os.str();
}

}  // namespace fetalnet::train
