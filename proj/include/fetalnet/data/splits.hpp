#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

#include "fetalnet/data/manifest.hpp"

namespace fetalnet::data {

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct Splits {
  DatasetManifest train;
  DatasetManifest val;
  DatasetManifest test;
};

/// Patient counts per split: floor of each share, remainder by largest
/// fractional part, and at least one patient for every split with a nonzero ratio.
inline std::array<std::size_t, 3> split_counts(std::size_t patients, const SplitRatios& r) {
  const std::array<double, 3> ratio{r.train, r.val, r.test};
  double sum = 0.0;
  int active = 0;
  for (double v : ratio) {
    if (!(v >= 0.0)) throw ConfigError("split ratios must be nonnegative");
    sum += v;
    active += v > 0.0;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (patients < static_cast<std::size_t>(active)) {
    throw DataError("cannot split " + std::to_string(patients) + " patients into " +
                    std::to_string(active) + " nonempty splits");
  }
  std::array<std::size_t, 3> count{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    const double share = ratio[k] * static_cast<double>(patients);
    // guard against 0.6 * 700 landing just below 420
    const double rounded = std::round(share);
    const double whole = std::abs(share - rounded) < 1e-9 ? rounded : std::floor(share);
    count[k] = static_cast<std::size_t>(whole);
    frac[k] = share - whole;
    used += count[k];
  }
  while (used < patients) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (frac[k] > frac[best]) best = k;
    ++count[best];
    frac[best] = -1.0;
    ++used;
  }
  for (int k = 0; k < 3; ++k) {
    if (ratio[k] > 0.0 && count[k] == 0) {
      const auto big = static_cast<std::size_t>(std::max_element(count.begin(), count.end()) - count.begin());
      --count[big];
      ++count[k];
    }
  }
  return count;
}

/// Random patient-level split; clip order within each split follows the input.
inline Splits make_splits(const DatasetManifest& m, const SplitRatios& r, std::uint64_t seed) {
  auto ids = patient_ids(m);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto count = split_counts(ids.size(), r);
  std::array<std::set<std::string>, 3> members;
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < count[k]; ++i) members[k].insert(ids[pos++]);
  Splits s{{m.base_dir, {}}, {m.base_dir, {}}, {m.base_dir, {}}};
  for (const auto& c : m.entries) {
    if (members[0].count(c.patient_id)) {
      s.train.entries.push_back(c);
    } else if (members[1].count(c.patient_id)) {
      s.val.entries.push_back(c);
    } else {
      s.test.entries.push_back(c);
    }
  }
  return s;
}

}  // namespace fetalnet::data
