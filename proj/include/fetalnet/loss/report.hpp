#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetalnet/loss/metrics.hpp"

namespace fetalnet::metrics {

/// Evaluation summary. Field names below are the stable JSON/CSV interface.
struct MetricReport {
  double iou = 0.0;
  double dice = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  AdfStats adf_hc;
  AdfStats adf_bpd;
  AdfStats adf_ac;
  AdfStats adf_fl;
};

namespace detail {

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "iou",          "dice",        "accuracy",     "precision",   "recall",
      "f1",           "adf_hc_mean", "adf_hc_std",   "adf_hc_n",    "adf_bpd_mean",
      "adf_bpd_std",  "adf_bpd_n",   "adf_ac_mean",  "adf_ac_std",  "adf_ac_n",
      "adf_fl_mean",  "adf_fl_std",  "adf_fl_n"};
  return cols;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["iou"] = r.iou;
  j["dice"] = r.dice;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  auto put = [&](const char* key, const AdfStats& s) {
    const std::string k(key);
    j["adf_" + k + "_mean"] = s.mean;
    j["adf_" + k + "_std"] = s.std;
    j["adf_" + k + "_n"] = s.count;
  };
  put("hc", r.adf_hc);
  put("bpd", r.adf_bpd);
  put("ac", r.adf_ac);
  put("fl", r.adf_fl);
  return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.iou = j.at("iou");
  r.dice = j.at("dice");
  r.accuracy = j.at("accuracy");
  r.precision = j.at("precision");
  r.recall = j.at("recall");
  r.f1 = j.at("f1");
  auto get = [&](const std::string& k, AdfStats& s) {
    s.mean = j.at("adf_" + k + "_mean");
    s.std = j.at("adf_" + k + "_std");
    s.count = j.at("adf_" + k + "_n");
  };
  get("hc", r.adf_hc);
  get("bpd", r.adf_bpd);
  get("ac", r.adf_ac);
  get("fl", r.adf_fl);
  return r;
}

inline std::string csv_header(const std::vector<std::string>& leading = {}) {
  std::ostringstream os;
  bool first = true;
  for (const auto& c : leading) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  for (const auto& c : detail::report_columns()) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  return os.str();
}

inline std::string csv_row(const MetricReport& r, const std::vector<std::string>& leading = {}) {
  const auto j = to_json(r);
  std::ostringstream os;
  os.precision(10);
  bool first = true;
  for (const auto& c : leading) {
    os << (first ? "" : ",") << c;
    first = false;
  }
  for (const auto& c : detail::report_columns()) {
    os << (first ? "" : ",");
    if (c.ends_with("_n")) {
      os << j[c].get<std::size_t>();
    } else {
      os << j[c].get<double>();
    }
    first = false;
  }
  return os.str();
}

}  // namespace fetalnet::metrics
