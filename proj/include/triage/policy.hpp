#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/classifier/model.hpp"
#include "triage/error.hpp"
#include "triage/labels.hpp"

namespace triage {

struct TriagePolicy {
  double label_threshold = 0.5;
  bool assign_enabled = false;
  double assign_min_confidence = 0.0;  // 0 = always assign
  std::vector<std::string> roster;

  void validate() const {
    if (!(label_threshold > 0.0 && label_threshold <= 1.0))
      throw ConfigError("label_threshold must lie in (0, 1]");
    if (!(assign_min_confidence >= 0.0 && assign_min_confidence <= 1.0))
      throw ConfigError("assign_min_confidence must lie in [0, 1]");
    if (assign_enabled && roster.empty()) throw ConfigError("assignment enabled with an empty roster");
  }

  nlohmann::ordered_json to_json() const {
    return {{"label_threshold", label_threshold},
            {"assign_enabled", assign_enabled},
            {"assign_min_confidence", assign_min_confidence},
            {"roster", roster}};
  }

  static TriagePolicy from_json(const nlohmann::json& j) {
    TriagePolicy p;
    try {
      p.label_threshold = j.at("label_threshold").get<double>();
      p.assign_enabled = j.at("assign_enabled").get<bool>();
      p.assign_min_confidence = j.at("assign_min_confidence").get<double>();
      p.roster = j.at("roster").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("invalid policy: ") + e.what());
    }
    p.validate();
    return p;
  }

  static TriagePolicy load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open policy file: " + path);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("policy file is not valid JSON: " + path);
    return from_json(j);
  }

  friend bool operator==(const TriagePolicy&, const TriagePolicy&) = default;
};

struct LabelDecision {
  std::string category;
  double confidence = 0.0;

  friend bool operator==(const LabelDecision&, const LabelDecision&) = default;
};

struct AssigneeDecision {
  std::string login;
  double confidence = 0.0;
  std::size_t index = 0;  // roster position

  friend bool operator==(const AssigneeDecision&, const AssigneeDecision&) = default;
};

/// Categories whose probability reaches the threshold (inclusive), highest
/// confidence first; equal confidences keep category order.
inline std::vector<LabelDecision> decide_labels(const Prediction& probs, const TriagePolicy& policy) {
  if (probs.probs.size() != kNumCategories)
    throw MismatchError("label decision needs 3 probabilities, got " + std::to_string(probs.probs.size()));
  std::vector<LabelDecision> out;
  for (std::size_t i = 0; i < kNumCategories; ++i) {
    if (probs.probs[i] >= policy.label_threshold)
      out.push_back({std::string(kCategoryNames[i]), probs.probs[i]});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const LabelDecision& a, const LabelDecision& b) { return a.confidence > b.confidence; });
  return out;
}

/// Argmax over the roster (lowest index wins ties); nullopt when the top
/// probability is below assign_min_confidence.
inline std::optional<AssigneeDecision> decide_assignee(const Prediction& probs, const TriagePolicy& policy) {
  if (probs.probs.size() != policy.roster.size())
    throw MismatchError("roster has " + std::to_string(policy.roster.size()) + " developers but the model scores " +
                        std::to_string(probs.probs.size()));
  if (probs.probs.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.probs.size(); ++i) {
    if (probs.probs[i] > probs.probs[best]) best = i;
  }
  if (probs.probs[best] < policy.assign_min_confidence) return std::nullopt;
  return AssigneeDecision{policy.roster[best], probs.probs[best], best};
}

}  // namespace triage
