#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fetalnet/model/fetalnet.hpp"

namespace fetalnet::model {

// Layout (little-endian):
//   "FETALNET" | u32 version | u64 header length | header JSON
//   u64 array count | per array: u32 name length, name, 4 x i32 shape, f64 values
// The header holds {"config": NetConfig, "meta": free-form object}.

inline constexpr char kCheckpointMagic[8] = {'F', 'E', 'T', 'A', 'L', 'N', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct CheckpointData {
  NetConfig config;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<NamedArray> arrays;
};

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw CheckpointMismatch("checkpoint " + path + " is truncated");
  }
  return v;
}

}  // namespace detail

inline CheckpointData snapshot(FetalNet& net, nlohmann::json meta = nlohmann::json::object()) {
  CheckpointData d{net.config(), std::move(meta), {}};
  net.visit([&](const std::string& name, nn::Param& p) {
    d.arrays.push_back({name, p.value.shape(), {p.value.values().begin(), p.value.values().end()}});
  });
  return d;
}

inline void write_checkpoint(const std::filesystem::path& path, const CheckpointData& d) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  const std::string header = nlohmann::ordered_json{{"config", to_json(d.config)}, {"meta", d.meta}}.dump();
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  detail::put<std::uint64_t>(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  detail::put<std::uint64_t>(os, d.arrays.size());
  for (const auto& a : d.arrays) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(a.name.size()));
    os.write(a.name.data(), static_cast<std::streamsize>(a.name.size()));
    for (int v : {a.shape.n, a.shape.c, a.shape.h, a.shape.w}) detail::put<std::int32_t>(os, v);
    os.write(reinterpret_cast<const char*>(a.values.data()),
             static_cast<std::streamsize>(a.values.size() * sizeof(double)));
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

inline void save_checkpoint(const std::filesystem::path& path, FetalNet& net,
                            nlohmann::json meta = nlohmann::json::object()) {
  write_checkpoint(path, snapshot(net, std::move(meta)));
}

inline CheckpointData read_checkpoint(const std::filesystem::path& path) {
  const std::string p = path.string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + p);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw CheckpointMismatch(p + " is not a checkpoint file");
  }
  const auto version = detail::get<std::uint32_t>(is, p);
  if (version != kCheckpointVersion) {
    throw CheckpointMismatch(p + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = detail::get<std::uint64_t>(is, p);
  if (header_len > (1u << 24)) throw CheckpointMismatch(p + ": corrupt header length");
  std::string header(header_len, '\0');
  if (!is.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw CheckpointMismatch("checkpoint " + p + " is truncated");
  }
  CheckpointData d;
  try {
    const auto j = nlohmann::json::parse(header);
    d.config = net_config_from_json(j.at("config"));
    if (j.contains("meta")) d.meta = j.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointMismatch(p + ": bad header: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointMismatch(p + ": bad embedded config: " + e.what());
  }
  const auto count = detail::get<std::uint64_t>(is, p);
  if (count > 100000) throw CheckpointMismatch(p + ": corrupt array count");
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedArray a;
    const auto len = detail::get<std::uint32_t>(is, p);
    if (len > 4096) throw CheckpointMismatch(p + ": corrupt array name");
    a.name.resize(len);
    if (!is.read(a.name.data(), len)) throw CheckpointMismatch("checkpoint " + p + " is truncated");
    a.shape.n = detail::get<std::int32_t>(is, p);
    a.shape.c = detail::get<std::int32_t>(is, p);
    a.shape.h = detail::get<std::int32_t>(is, p);
    a.shape.w = detail::get<std::int32_t>(is, p);
    if (a.shape.n < 0 || a.shape.c < 0 || a.shape.h < 0 || a.shape.w < 0 ||
        a.shape.numel() > (std::size_t{1} << 32)) {
      throw CheckpointMismatch(p + ": corrupt shape for " + a.name);
    }
    a.values.resize(a.shape.numel());
    if (!is.read(reinterpret_cast<char*>(a.values.data()),
                 static_cast<std::streamsize>(a.values.size() * sizeof(double)))) {
      throw CheckpointMismatch("checkpoint " + p + " is truncated");
    }
    d.arrays.push_back(std::move(a));
  }
  return d;
}

/// Copies the arrays into `net` after checking names and shapes against the
/// network. All differences are listed in the error.
inline void restore(FetalNet& net, const CheckpointData& d) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : d.arrays) by_name[a.name] = &a;
  std::vector<std::string> diffs;
  if (!(d.config == net.config())) {
    diffs.push_back("config: checkpoint " + to_json(d.config).dump() + " vs model " +
                    to_json(net.config()).dump());
  }
  std::size_t matched = 0;
  net.visit([&](const std::string& name, nn::Param& p) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      diffs.push_back(name + ": missing from checkpoint (model " + to_string(p.value.shape()) + ")");
      return;
    }
    ++matched;
    if (!(it->second->shape == p.value.shape())) {
      diffs.push_back(name + ": checkpoint " + to_string(it->second->shape) + " vs model " +
                      to_string(p.value.shape()));
    }
  });
  if (matched != by_name.size()) {
    for (const auto& [name, a] : by_name) {
      bool known = false;
      net.visit([&](const std::string& n, nn::Param&) { known = known || n == name; });
      if (!known) diffs.push_back(name + ": not a parameter of the model");
    }
  }
  if (!diffs.empty()) {
    std::ostringstream os;
    os << "checkpoint does not match the model (" << diffs.size() << " differences):";
    for (const auto& s : diffs) os << "\n  " << s;
    throw CheckpointMismatch(os.str());
  }
  for (const auto& a : d.arrays) {
    if (!a.name.ends_with("running_var")) continue;
    for (double x : a.values)
      if (!(x > 0.0)) throw CheckpointMismatch(a.name + ": running variance must be positive");
  }
  net.visit([&](const std::string& name, nn::Param& p) {
    const auto& v = by_name.at(name)->values;
    std::copy(v.begin(), v.end(), p.value.data());
  });
}

/// Builds the network described by the embedded config and loads its weights.
inline FetalNet load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta = nullptr) {
  auto d = read_checkpoint(path);
  FetalNet net(d.config);
  restore(net, d);
  if (meta) *meta = d.meta;
  return net;
}

}  // namespace fetalnet::model
