#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdm {

/// One machining feature type produced by the synthetic generator.
struct FeatureTypeInfo {
  std::string_view key;
  std::string_view display_name;
  std::string_view family;
  /// Number of faces the template cut creates.
  int template_faces;
};

inline constexpr std::array<FeatureTypeInfo, 8> kFeatureTypes{{
    {"rect_through_slot", "Rectangular Through Slot", "slot", 3},
    {"rect_blind_slot", "Rectangular Blind Slot", "slot", 4},
    {"triangular_slot", "Triangular Slot", "slot", 2},
    {"circular_through_hole", "Circular Through Hole", "hole", 2},
    {"circular_blind_hole", "Circular Blind Hole", "hole", 3},
    {"rect_pocket", "Rectangular Pocket", "pocket", 5},
    {"step", "Step", "step", 2},
    {"side_notch", "Side Notch", "notch", 3},
}};

/// Condition vocabulary: the eight specific types followed by the two
/// ambiguous family names that designers use ("the slot", "the hole").
/// Families with a single member resolve to that member.
inline constexpr std::array<std::string_view, 10> kConditionVocabulary{
    "rect_through_slot", "rect_blind_slot", "triangular_slot", "circular_through_hole",
    "circular_blind_hole", "rect_pocket", "step", "side_notch", "slot", "hole"};

inline std::optional<FeatureTypeInfo> feature_type_info(std::string_view key) {
  for (const auto& info : kFeatureTypes) {
    if (info.key == key) return info;
  }
  return std::nullopt;
}

inline int feature_type_index(std::string_view key) {
  for (std::size_t i = 0; i < kFeatureTypes.size(); ++i) {
    if (kFeatureTypes[i].key == key) return static_cast<int>(i);
  }
  return -1;
}

inline int condition_index(std::string_view key) {
  for (std::size_t i = 0; i < kConditionVocabulary.size(); ++i) {
    if (kConditionVocabulary[i] == key) return static_cast<int>(i);
  }
  return -1;
}

inline std::vector<std::string> condition_vocabulary_list() {
  return {kConditionVocabulary.begin(), kConditionVocabulary.end()};
}

namespace detail {

inline std::string slugify(std::string_view text) {
  std::string out;
  bool pending_sep = false;
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u)) {
      if (pending_sep && !out.empty()) out.push_back('_');
      pending_sep = false;
      out.push_back(static_cast<char>(std::tolower(u)));
    } else {
      pending_sep = true;
    }
  }
  return out;
}

}  // namespace detail

/// Maps free-form feature names ("Rectangular Through Slot", "V-slot",
/// "through hole", "Slot") onto the condition vocabulary.
inline std::optional<std::string> normalize_feature_name(std::string_view text) {
  static const std::array<std::pair<std::string_view, std::string_view>, 32> aliases{{
      {"rect_through_slot", "rect_through_slot"},
      {"rectangular_through_slot", "rect_through_slot"},
      {"through_slot", "rect_through_slot"},
      {"rect_blind_slot", "rect_blind_slot"},
      {"rectangular_blind_slot", "rect_blind_slot"},
      {"blind_slot", "rect_blind_slot"},
      {"triangular_slot", "triangular_slot"},
      {"triangular_through_slot", "triangular_slot"},
      {"v_slot", "triangular_slot"},
      {"v_shaped_slot", "triangular_slot"},
      {"circular_through_hole", "circular_through_hole"},
      {"through_hole", "circular_through_hole"},
      {"circular_blind_hole", "circular_blind_hole"},
      {"blind_hole", "circular_blind_hole"},
      {"rect_pocket", "rect_pocket"},
      {"rectangular_pocket", "rect_pocket"},
      {"pocket", "rect_pocket"},
      {"step", "step"},
      {"side_notch", "side_notch"},
      {"notch", "side_notch"},
      {"slot", "slot"},
      {"hole", "hole"},
      {"circular_hole", "hole"},
      {"rectangular_slot", "slot"},
      {"rect_slot", "slot"},
      {"slots", "slot"},
      {"holes", "hole"},
      {"pockets", "rect_pocket"},
      {"steps", "step"},
      {"notches", "side_notch"},
      {"rectangular_notch", "side_notch"},
      {"side_notches", "side_notch"},
  }};
  const std::string slug = detail::slugify(text);
  if (slug.empty()) return std::nullopt;
  for (const auto& [alias, key] : aliases) {
    if (alias == slug) return std::string(key);
  }
  return std::nullopt;
}

/// True when `condition` (specific key or family) covers feature type `key`.
inline bool condition_matches(std::string_view condition, std::string_view key) {
  if (condition == key) return true;
  auto info = feature_type_info(key);
  return info && info->family == condition;
}

}  // namespace sdm
