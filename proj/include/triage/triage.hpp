#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/classifier.hpp"
#include "triage/error.hpp"
#include "triage/policy.hpp"
#include "triage/textproc.hpp"

namespace triage {

/// Immutable pair of deployed models with their content identifiers.
class TriageModels {
 public:
  explicit TriageModels(ModelBundle label_model, std::optional<ModelBundle> assign_model = std::nullopt)
      : labels_(std::move(label_model)), assign_(std::move(assign_model)) {
    if (labels_.task.task != Task::kMultilabel)
      throw MismatchError("label model was trained for '" + to_string(labels_.task.task) +
                          "', expected multilabel3");
    if (assign_ && assign_->task.task != Task::kMulticlass)
      throw MismatchError("assignment model was trained for '" + to_string(assign_->task.task) +
                          "', expected multiclassK");
    label_id_ = model_id(labels_);
    if (assign_) assign_id_ = model_id(*assign_);
  }

  const ModelBundle& labels() const { return labels_; }
  const ModelBundle* assign() const { return assign_ ? &*assign_ : nullptr; }
  const std::string& label_id() const { return label_id_; }
  const std::string& assign_id() const { return assign_id_; }

 private:
  ModelBundle labels_;
  std::optional<ModelBundle> assign_;
  std::string label_id_;
  std::string assign_id_;
};

struct TriageDecision {
  std::vector<LabelDecision> labels;
  std::optional<AssigneeDecision> assignee;
  std::vector<std::string> model_versions;
  /// Set when no assignment model exists for the repository; the decision is label-only.
  bool cold_start = false;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["labels"] = nlohmann::ordered_json::array();
    for (const auto& l : labels) j["labels"].push_back({{"name", l.category}, {"confidence", l.confidence}});
    if (assignee) {
      j["assignee"] = {{"login", assignee->login}, {"confidence", assignee->confidence}};
    } else {
      j["assignee"] = nullptr;
    }
    j["model_versions"] = model_versions;
    j["cold_start"] = cold_start;
    return j;
  }

  friend bool operator==(const TriageDecision&, const TriageDecision&) = default;
};

/// Encodes the issue text, runs both heads, and applies the policy.
inline TriageDecision triage_issue(std::string_view title, std::string_view body, const TriageModels& models,
                                   const TriagePolicy& policy) {
  const std::string text = concat_title_body(title, body);
  TriageDecision d;
  d.model_versions.push_back(models.label_id());
  d.labels = decide_labels(forward(models.labels(), encode_input(models.labels(), text)), policy);

  const ModelBundle* assign = models.assign();
  if (policy.assign_enabled) {
    if (!assign) throw ConfigError("assignment is enabled but no assignment model is loaded");
    if (policy.roster != assign->task.label_names)
      throw MismatchError("policy roster differs from the assignment model's developer list");
    d.model_versions.push_back(models.assign_id());
    d.assignee = decide_assignee(forward(*assign, encode_input(*assign, text)), policy);
  } else if (!assign) {
    d.cold_start = true;
  }
  return d;
}

}  // namespace triage
