#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/error.hpp"

namespace triage {

enum class Category : std::size_t { kBug = 0, kEnhancement = 1, kQuestion = 2 };

inline constexpr std::size_t kNumCategories = 3;
inline constexpr std::array<std::string_view, kNumCategories> kCategoryNames = {
    "bug", "enhancement", "question"};

inline std::string_view category_name(Category c) {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

/// Multi-hot membership over the three canonical categories. Any subset is valid.
struct LabelVector {
  bool bug = false;
  bool enhancement = false;
  bool question = false;

  bool operator[](std::size_t i) const {
    switch (i) {
      case 0: return bug;
      case 1: return enhancement;
      default: return question;
    }
  }
  void set(std::size_t i, bool v) {
    switch (i) {
      case 0: bug = v; break;
      case 1: enhancement = v; break;
      default: question = v; break;
    }
  }
  bool any() const { return bug || enhancement || question; }

  /// Canonical names of the set categories, in category order.
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kNumCategories; ++i) {
      if ((*this)[i]) out.emplace_back(kCategoryNames[i]);
    }
    return out;
  }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

namespace detail {

inline std::string trim_lower(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace detail

/// Maps repository label strings onto canonical categories. Keys are matched
/// case-insensitively after trimming.
class LabelAliasMap {
 public:
  LabelAliasMap() = default;

  static LabelAliasMap defaults() {
    LabelAliasMap m;
    for (auto a : {"bug", "bug-report", "type: bug", "kind/bug", "defect", "crash"})
      m.add(a, Category::kBug);
    for (auto a : {"enhancement", "feature", "feature request", "kind/feature", "type: feature",
                   "improvement"})
      m.add(a, Category::kEnhancement);
    for (auto a : {"question", "kind/question", "support", "type: question"})
      m.add(a, Category::kQuestion);
    return m;
  }

  /// Reads {"bug": [...], "enhancement": [...], "question": [...]}. Missing
  /// categories keep no aliases; unknown keys are rejected.
  static LabelAliasMap from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("label alias map must be a JSON object");
    LabelAliasMap m;
    for (const auto& [key, aliases] : j.items()) {
      auto it = std::find(kCategoryNames.begin(), kCategoryNames.end(), key);
      if (it == kCategoryNames.end()) throw ConfigError("unknown category in alias map: " + key);
      if (!aliases.is_array()) throw ConfigError("aliases for '" + key + "' must be an array");
      const auto cat = static_cast<Category>(it - kCategoryNames.begin());
      for (const auto& a : aliases) {
        if (!a.is_string()) throw ConfigError("alias for '" + key + "' must be a string");
        m.add(a.get<std::string>(), cat);
      }
    }
    return m;
  }

  static LabelAliasMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open label alias map: " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid label alias map " + path + ": " + e.what());
    }
  }

  void add(std::string_view alias, Category c) { aliases_[detail::trim_lower(alias)] = c; }

  const Category* find(std::string_view raw) const {
    auto it = aliases_.find(detail::trim_lower(raw));
    return it == aliases_.end() ? nullptr : &it->second;
  }

 private:
  std::map<std::string, Category> aliases_;
};

inline const LabelAliasMap& default_alias_map() {
  static const LabelAliasMap m = LabelAliasMap::defaults();
  return m;
}

/// Total function: unmatched labels are ignored.
inline LabelVector canonicalize_labels(const std::vector<std::string>& raw_labels,
                                       const LabelAliasMap& map = default_alias_map()) {
  LabelVector v;
  for (const auto& raw : raw_labels) {
    if (const Category* c = map.find(raw)) v.set(static_cast<std::size_t>(*c), true);
  }
  return v;
}

}  // namespace triage
