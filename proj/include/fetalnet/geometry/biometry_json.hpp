#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetalnet/geometry/measure.hpp"

namespace fetalnet::geometry {

/// {frame_id, label, hc_mm, bpd_mm, ac_mm, fl_mm, reason}; absent values are null.
inline nlohmann::ordered_json to_json(const BiometryResult& r, const std::string& frame_id) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["frame_id"] = frame_id;
  j["label"] = std::string(fetalnet::to_string(r.label));
  j["hc_mm"] = opt(r.hc_mm);
  j["bpd_mm"] = opt(r.bpd_mm);
  j["ac_mm"] = opt(r.ac_mm);
  j["fl_mm"] = opt(r.fl_mm);
  j["reason"] = r.reason.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(r.reason);
  return j;
}

inline BiometryResult biometry_from_json(const nlohmann::json& j) {
  BiometryResult r;
  const auto label = parse_label(j.at("label").get<std::string>());
  if (!label) throw DataError("unknown label " + j.at("label").dump());
  r.label = *label;
  auto opt = [&](const char* key) -> std::optional<double> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
  };
  r.hc_mm = opt("hc_mm");
  r.bpd_mm = opt("bpd_mm");
  r.ac_mm = opt("ac_mm");
  r.fl_mm = opt("fl_mm");
  if (j.contains("reason") && !j.at("reason").is_null()) r.reason = j.at("reason");
  return r;
}

/// True when the result carries exactly the fields its label calls for.
inline bool fields_match_label(const BiometryResult& r) {
  switch (r.label) {
    case ClassLabel::Head: return !r.ac_mm && !r.fl_mm && bool(r.hc_mm) == bool(r.bpd_mm);
    case ClassLabel::Abdomen: return !r.hc_mm && !r.bpd_mm && !r.fl_mm;
    case ClassLabel::Femur: return !r.hc_mm && !r.bpd_mm && !r.ac_mm;
    case ClassLabel::Background: return !r.has_any();
  }
  return false;
}

/// Reads {clip_id: [result per frame]}; an absent file gives an empty map.
inline std::map<std::string, std::vector<BiometryResult>> load_biometry_sidecar(
    const std::filesystem::path& path) {
  std::map<std::string, std::vector<BiometryResult>> out;
  std::ifstream is(path);
  if (!is) return out;
  try {
    const auto j = nlohmann::json::parse(is);
    for (const auto& [clip, frames] : j.items())
      for (const auto& f : frames) out[clip].push_back(biometry_from_json(f));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad measurement sidecar " + path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace fetalnet::geometry
