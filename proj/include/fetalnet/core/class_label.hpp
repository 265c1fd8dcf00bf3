#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "fetalnet/core/error.hpp"

namespace fetalnet {

enum class ClassLabel : int { Head = 0, Abdomen = 1, Femur = 2, Background = 3 };

inline constexpr int kNumClasses = 4;

inline constexpr std::array<ClassLabel, kNumClasses> kAllLabels = {
    ClassLabel::Head, ClassLabel::Abdomen, ClassLabel::Femur, ClassLabel::Background};

constexpr int index_of(ClassLabel label) { return static_cast<int>(label); }

constexpr bool is_foreground(ClassLabel label) { return label != ClassLabel::Background; }

inline ClassLabel label_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw InvalidInput("class index out of range: " + std::to_string(index));
  }
  return static_cast<ClassLabel>(index);
}

inline std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::Head: return "Head";
    case ClassLabel::Abdomen: return "Abdomen";
    case ClassLabel::Femur: return "Femur";
    case ClassLabel::Background: return "Background";
  }
  return "Background";
}

inline std::optional<ClassLabel> parse_label(std::string_view name) {
  for (auto label : kAllLabels) {
    if (to_string(label) == name) return label;
  }
  return std::nullopt;
}

}  // namespace fetalnet
