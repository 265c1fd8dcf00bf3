#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetalnet/core/class_label.hpp"
#include "fetalnet/core/error.hpp"

namespace fetalnet::data {

struct FrameEntry {
  int index = 0;
  std::string path;
  ClassLabel label = ClassLabel::Background;
  std::optional<std::string> mask;
};

struct ClipEntry {
  std::string patient_id;
  std::string clip_id;
  double pixel_spacing_mm = 0.0;
  std::vector<FrameEntry> frames;
};

/// Dataset description. Paths are relative to `base_dir`.
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ClipEntry> entries;

  std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }
};

namespace detail {

inline DataError manifest_error(std::size_t entry, const std::string& field, const std::string& msg) {
  return DataError("manifest entry " + std::to_string(entry) + ", " + field + ": " + msg);
}

}  // namespace detail

/// Throws DataError naming the entry index and field of the first violation.
inline void validate(const DatasetManifest& m) {
  std::set<std::string> clip_ids;
  for (std::size_t e = 0; e < m.entries.size(); ++e) {
    const auto& c = m.entries[e];
    if (c.patient_id.empty()) throw detail::manifest_error(e, "patient_id", "must be nonempty");
    if (c.clip_id.empty()) throw detail::manifest_error(e, "clip_id", "must be nonempty");
    if (!clip_ids.insert(c.clip_id).second)
      throw detail::manifest_error(e, "clip_id", "duplicate id '" + c.clip_id + "'");
    if (!(c.pixel_spacing_mm > 0.0))
      throw detail::manifest_error(e, "pixel_spacing_mm", "must be positive");
    if (c.frames.empty()) throw detail::manifest_error(e, "frames", "clip has no frames");
    for (std::size_t f = 0; f < c.frames.size(); ++f) {
      const auto& fr = c.frames[f];
      const std::string where = "frames[" + std::to_string(f) + "]";
      if (f > 0 && fr.index <= c.frames[f - 1].index)
        throw detail::manifest_error(e, where + ".index", "frame order must be strictly increasing");
      if (fr.path.empty()) throw detail::manifest_error(e, where + ".path", "must be nonempty");
      if (is_foreground(fr.label) && (!fr.mask || fr.mask->empty()))
        throw detail::manifest_error(e, where + ".mask",
                                     "foreground frame " + std::to_string(fr.index) + " (" +
                                         std::string(to_string(fr.label)) + ") has no mask");
    }
  }
}

inline nlohmann::ordered_json to_json(const DatasetManifest& m) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& c : m.entries) {
    nlohmann::ordered_json frames = nlohmann::ordered_json::array();
    for (const auto& f : c.frames) {
      nlohmann::ordered_json j{{"index", f.index}, {"path", f.path}, {"label", to_string(f.label)}};
      j["mask"] = f.mask ? nlohmann::ordered_json(*f.mask) : nlohmann::ordered_json(nullptr);
      frames.push_back(std::move(j));
    }
    entries.push_back({{"patient_id", c.patient_id},
                       {"clip_id", c.clip_id},
                       {"pixel_spacing_mm", c.pixel_spacing_mm},
                       {"frames", std::move(frames)}});
  }
  return {{"version", 1}, {"entries", std::move(entries)}};
}

/// Parses and validates. `base_dir` is where relative paths resolve.
inline DatasetManifest manifest_from_json(const nlohmann::json& j, std::filesystem::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  if (!j.is_object() || !j.contains("entries") || !j.at("entries").is_array())
    throw DataError("manifest: top-level object with an 'entries' array required");
  const auto& entries = j.at("entries");
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& je = entries[e];
    auto field = [&](const char* key) -> const nlohmann::json& {
      if (!je.contains(key)) throw detail::manifest_error(e, key, "missing");
      return je.at(key);
    };
    ClipEntry c;
    try {
      c.patient_id = field("patient_id").get<std::string>();
      c.clip_id = field("clip_id").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw detail::manifest_error(e, "patient_id/clip_id", "must be strings");
    }
    const auto& sp = field("pixel_spacing_mm");
    if (sp.is_number()) {
      c.pixel_spacing_mm = sp.get<double>();
    } else if (sp.is_array() && sp.size() == 2 && sp[0].is_number() && sp[1].is_number()) {
      const double sy = sp[0].get<double>(), sx = sp[1].get<double>();
      if (std::abs(sy - sx) > 1e-9 * std::max(std::abs(sy), std::abs(sx)))
        throw detail::manifest_error(e, "pixel_spacing_mm", "anisotropic spacing is not supported");
      c.pixel_spacing_mm = sy;
    } else {
      throw detail::manifest_error(e, "pixel_spacing_mm", "must be a number or [row, col] pair");
    }
    const auto& jf = field("frames");
    if (!jf.is_array()) throw detail::manifest_error(e, "frames", "must be an array");
    for (std::size_t f = 0; f < jf.size(); ++f) {
      const std::string where = "frames[" + std::to_string(f) + "]";
      const auto& x = jf[f];
      FrameEntry fr;
      try {
        fr.index = x.contains("index") ? x.at("index").get<int>() : static_cast<int>(f);
        fr.path = x.at("path").get<std::string>();
        const auto name = x.at("label").get<std::string>();
        const auto label = parse_label(name);
        if (!label) throw detail::manifest_error(e, where + ".label", "unknown label '" + name + "'");
        fr.label = *label;
        if (x.contains("mask") && !x.at("mask").is_null()) fr.mask = x.at("mask").get<std::string>();
      } catch (const nlohmann::json::exception& ex) {
        throw detail::manifest_error(e, where, ex.what());
      }
      c.frames.push_back(std::move(fr));
    }
    m.entries.push_back(std::move(c));
  }
  validate(m);
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, path.parent_path());
}

inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  validate(m);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest " + path.string());
  os << to_json(m).dump(2) << "\n";
}

inline bool operator==(const FrameEntry& a, const FrameEntry& b) {
  return a.index == b.index && a.path == b.path && a.label == b.label && a.mask == b.mask;
}
inline bool operator==(const ClipEntry& a, const ClipEntry& b) {
  return a.patient_id == b.patient_id && a.clip_id == b.clip_id &&
         a.pixel_spacing_mm == b.pixel_spacing_mm && a.frames == b.frames;
}

/// Distinct patient ids in first-appearance order.
inline std::vector<std::string> patient_ids(const DatasetManifest& m) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& c : m.entries)
    if (seen.insert(c.patient_id).second) ids.push_back(c.patient_id);
  return ids;
}

}  // namespace fetalnet::data
