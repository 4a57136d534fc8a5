#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/classifier.hpp"
#include "triage/corpus.hpp"
#include "triage/error.hpp"
#include "triage/labels.hpp"
#include "triage/policy.hpp"
#include "triage/textproc.hpp"

namespace triage {

struct ClassCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t support() const { return tp + fn; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// One-vs-rest counts per class. For every class tp + fp + fn + tn = n_instances.
struct ConfusionCounts {
  std::vector<std::string> class_names;
  std::vector<ClassCounts> per_class;
  std::uint64_t n_instances = 0;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

inline ConfusionCounts confusion_multilabel(std::span<const LabelVector> preds,
                                            std::span<const LabelVector> truths) {
  if (preds.size() != truths.size())
    throw MismatchError("predictions and truths differ in length (" + std::to_string(preds.size()) + " vs " +
                        std::to_string(truths.size()) + ")");
  if (preds.empty()) throw SizeError("cannot evaluate an empty set");
  ConfusionCounts c;
  for (auto n : kCategoryNames) c.class_names.emplace_back(n);
  c.per_class.resize(kNumCategories);
  c.n_instances = preds.size();
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t k = 0; k < kNumCategories; ++k) {
      const bool p = preds[i][k];
      const bool t = truths[i][k];
      auto& cc = c.per_class[k];
      if (p && t) ++cc.tp;
      else if (p) ++cc.fp;
      else if (t) ++cc.fn;
      else ++cc.tn;
    }
  }
  return c;
}

/// One-vs-rest counts from a K x K confusion matrix. A missing prediction
/// (abstention) counts only as a miss for the true class.
inline ConfusionCounts confusion_multiclass(std::span<const std::optional<std::size_t>> preds,
                                            std::span<const std::size_t> truths, std::size_t num_classes,
                                            std::vector<std::string> class_names = {}) {
  if (preds.size() != truths.size())
    throw MismatchError("predictions and truths differ in length (" + std::to_string(preds.size()) + " vs " +
                        std::to_string(truths.size()) + ")");
  if (preds.empty()) throw SizeError("cannot evaluate an empty set");
  if (class_names.empty()) {
    for (std::size_t k = 0; k < num_classes; ++k) class_names.push_back(std::to_string(k));
  }
  if (class_names.size() != num_classes) throw MismatchError("class name count differs from K");
  std::vector<std::vector<std::uint64_t>> matrix(num_classes, std::vector<std::uint64_t>(num_classes, 0));
  std::vector<std::uint64_t> abstained(num_classes, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (truths[i] >= num_classes || (preds[i] && *preds[i] >= num_classes))
      throw ConfigError("class index out of range at instance " + std::to_string(i));
    if (preds[i]) {
      ++matrix[truths[i]][*preds[i]];
    } else {
      ++abstained[truths[i]];
    }
  }
  ConfusionCounts c;
  c.class_names = std::move(class_names);
  c.n_instances = preds.size();
  c.per_class.resize(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto& cc = c.per_class[k];
    cc.tp = matrix[k][k];
    for (std::size_t j = 0; j < num_classes; ++j) {
      if (j == k) continue;
      cc.fn += matrix[k][j];
      cc.fp += matrix[j][k];
    }
    cc.fn += abstained[k];
    cc.tn = c.n_instances - cc.tp - cc.fp - cc.fn;
  }
  return c;
}

inline ConfusionCounts confusion_multiclass(std::span<const std::size_t> preds, std::span<const std::size_t> truths,
                                            std::size_t num_classes, std::vector<std::string> class_names = {}) {
  std::vector<std::optional<std::size_t>> p(preds.begin(), preds.end());
  return confusion_multiclass(std::span<const std::optional<std::size_t>>(p), truths, num_classes,
                              std::move(class_names));
}

// ---------------------------------------------------------------------------

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// F1 = 2PR/(P+R), or 0 when P + R = 0.
inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Zero denominators yield 0. F1 is taken as 2tp / (2tp + fp + fn), equal to
/// 2PR/(P+R) but with a single rounding.
inline Metrics metrics_from(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn) {
  Metrics m;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = tp > 0 ? static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn) : 0.0;
  return m;
}

namespace detail {

/// Sum of values in ascending order, so the result is independent of input order.
inline double ordered_mean(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Unweighted mean of each metric across classes.
inline Metrics macro_average(std::span<const Metrics> per_class) {
  std::vector<double> p, r, f;
  for (const auto& m : per_class) {
    p.push_back(m.precision);
    r.push_back(m.recall);
    f.push_back(m.f1);
  }
  return {detail::ordered_mean(p), detail::ordered_mean(r), detail::ordered_mean(f)};
}

struct ClassReport {
  std::string name;
  Metrics metrics;
  ClassCounts counts;

  friend bool operator==(const ClassReport&, const ClassReport&) = default;
};

struct EvalReport {
  std::string task;
  std::uint64_t n_instances = 0;
  std::optional<double> threshold;
  std::vector<ClassReport> per_class;
  Metrics macro;
  Metrics micro;
  Metrics weighted;  // support-weighted

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

inline EvalReport metrics_from_counts(const ConfusionCounts& counts, std::string task = "",
                                      std::optional<double> threshold = std::nullopt) {
  EvalReport rep;
  rep.task = std::move(task);
  rep.n_instances = counts.n_instances;
  rep.threshold = threshold;
  std::vector<Metrics> per;
  std::uint64_t tp = 0, fp = 0, fn = 0, support = 0;
  double wp = 0.0, wr = 0.0, wf = 0.0;
  for (std::size_t k = 0; k < counts.per_class.size(); ++k) {
    const auto& c = counts.per_class[k];
    const Metrics m = metrics_from(c.tp, c.fp, c.fn);
    per.push_back(m);
    rep.per_class.push_back({k < counts.class_names.size() ? counts.class_names[k] : std::to_string(k), m, c});
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    support += c.support();
    wp += m.precision * static_cast<double>(c.support());
    wr += m.recall * static_cast<double>(c.support());
    wf += m.f1 * static_cast<double>(c.support());
  }
  rep.macro = macro_average(per);
  rep.micro = metrics_from(tp, fp, fn);
  if (support > 0) {
    const auto s = static_cast<double>(support);
    rep.weighted = {wp / s, wr / s, wf / s};
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Rendering

/// Whole percent, rounded half-up: 0.7833 -> "78%", 0.785 -> "79%".
inline std::string format_percent(double x) {
  const auto v = static_cast<long long>(std::floor(x * 100.0 + 0.5 + 1e-9));
  return std::to_string(v) + "%";
}

enum class ReportFormat { kText, kJson };

inline nlohmann::ordered_json report_to_json(const EvalReport& r) {
  auto metrics_json = [](const Metrics& m) {
    return nlohmann::ordered_json{{"p", m.precision}, {"r", m.recall}, {"f1", m.f1}};
  };
  nlohmann::ordered_json j;
  j["task"] = r.task;
  j["n"] = r.n_instances;
  if (r.threshold) {
    j["threshold"] = *r.threshold;
  } else {
    j["threshold"] = nullptr;
  }
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (const auto& c : r.per_class) {
    auto e = metrics_json(c.metrics);
    e["tp"] = c.counts.tp;
    e["fp"] = c.counts.fp;
    e["fn"] = c.counts.fn;
    per[c.name] = e;
  }
  j["per_class"] = per;
  j["macro"] = metrics_json(r.macro);
  j["micro"] = metrics_json(r.micro);
  j["weighted"] = metrics_json(r.weighted);
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  auto metrics_of = [](const nlohmann::json& m) {
    return Metrics{m.at("p").get<double>(), m.at("r").get<double>(), m.at("f1").get<double>()};
  };
  EvalReport r;
  r.task = j.at("task").get<std::string>();
  r.n_instances = j.at("n").get<std::uint64_t>();
  if (!j.at("threshold").is_null()) r.threshold = j.at("threshold").get<double>();
  for (const auto& [name, e] : j.at("per_class").items()) {
    ClassReport c;
    c.name = name;
    c.metrics = metrics_of(e);
    c.counts.tp = e.at("tp").get<std::uint64_t>();
    c.counts.fp = e.at("fp").get<std::uint64_t>();
    c.counts.fn = e.at("fn").get<std::uint64_t>();
    c.counts.tn = r.n_instances - c.counts.tp - c.counts.fp - c.counts.fn;
    r.per_class.push_back(std::move(c));
  }
  r.macro = metrics_of(j.at("macro"));
  r.micro = metrics_of(j.at("micro"));
  r.weighted = metrics_of(j.at("weighted"));
  return r;
}

/// The three macro cells as rendered in the text table, e.g. "79% 78% 78%".
inline std::string macro_row_cells(const Metrics& macro) {
  return format_percent(macro.precision) + " " + format_percent(macro.recall) + " " + format_percent(macro.f1);
}

inline std::string render_report(const EvalReport& r, ReportFormat format) {
  if (format == ReportFormat::kJson) return report_to_json(r).dump(2);
  static constexpr std::string_view kMacro = "Macro-Average";
  std::size_t width = kMacro.size();
  for (const auto& c : r.per_class) width = std::max(width, c.name.size());
  width += 2;
  std::ostringstream out;
  auto row = [&](std::string_view name, const std::string& p, const std::string& rc, const std::string& f) {
    std::string line(name);
    line.resize(width, ' ');
    std::string cp = p, cr = rc;
    cp.resize(11, ' ');
    cr.resize(8, ' ');
    out << line << cp << cr << f << '\n';
  };
  row("Class", "Precision", "Recall", "F1-Score");
  for (const auto& c : r.per_class) {
    row(c.name, format_percent(c.metrics.precision), format_percent(c.metrics.recall),
        format_percent(c.metrics.f1));
  }
  row(kMacro, format_percent(r.macro.precision), format_percent(r.macro.recall), format_percent(r.macro.f1));
  out << "n = " << r.n_instances;
  if (r.threshold) out << ", threshold = " << *r.threshold;
  out << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// End-to-end evaluation

/// Decides every prediction under `policy` and scores against `truths`.
/// Multilabel truths are LabelVectors, multiclass truths class indices.
inline EvalReport evaluate_predictions(const TaskConfig& task, std::span<const Prediction> preds,
                                       std::span<const Target> truths, const TriagePolicy& policy) {
  if (preds.size() != truths.size()) throw MismatchError("predictions and truths differ in length");
  if (task.task == Task::kMultilabel) {
    std::vector<LabelVector> decided, truth;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (!std::holds_alternative<LabelVector>(truths[i])) throw MismatchError("multilabel evaluation needs label truths");
      LabelVector v;
      for (const auto& d : decide_labels(preds[i], policy)) {
        const auto idx = static_cast<std::size_t>(
            std::find(kCategoryNames.begin(), kCategoryNames.end(), d.category) - kCategoryNames.begin());
        v.set(idx, true);
      }
      decided.push_back(v);
      truth.push_back(std::get<LabelVector>(truths[i]));
    }
    return metrics_from_counts(confusion_multilabel(decided, truth), to_string(task.task), policy.label_threshold);
  }
  TriagePolicy p = policy;
  if (p.roster.empty()) p.roster = task.label_names;
  if (p.roster != task.label_names) throw MismatchError("policy roster differs from the model's developer list");
  std::vector<std::optional<std::size_t>> decided;
  std::vector<std::size_t> truth;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!std::holds_alternative<std::size_t>(truths[i])) throw MismatchError("multiclass evaluation needs class truths");
    const auto d = decide_assignee(preds[i], p);
    decided.push_back(d ? std::optional<std::size_t>(d->index) : std::nullopt);
    truth.push_back(std::get<std::size_t>(truths[i]));
  }
  return metrics_from_counts(confusion_multiclass(std::span<const std::optional<std::size_t>>(decided), truth,
                                                  task.num_outputs(), task.label_names),
                             to_string(task.task), std::nullopt);
}

/// Ground truth of `r` in the label space of `task`; MismatchError when the
/// record's assignee is not one of the model's classes.
inline Target target_for(const TaskConfig& task, const IssueRecord& r) {
  if (task.task == Task::kMultilabel) return r.labels;
  if (!r.assignee) throw MismatchError("issue " + std::to_string(r.id) + " has no assignee");
  const auto it = std::find(task.label_names.begin(), task.label_names.end(), *r.assignee);
  if (it == task.label_names.end())
    throw MismatchError("assignee '" + *r.assignee + "' of issue " + std::to_string(r.id) + " is not a model class");
  return static_cast<std::size_t>(it - task.label_names.begin());
}

/// Predict, decide, count, score.
inline EvalReport evaluate_model(const ModelBundle& model, const std::vector<IssueRecord>& records,
                                 const TriagePolicy& policy) {
  std::vector<Prediction> preds;
  std::vector<Target> truths;
  for (const auto& r : records) {
    truths.push_back(target_for(model.task, r));
    preds.push_back(forward(model, encode_input(model, concat_title_body(r.title, r.body))));
  }
  return evaluate_predictions(model.task, preds, truths, policy);
}

}  // namespace triage
