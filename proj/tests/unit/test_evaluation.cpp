#include <algorithm>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "triage/error.hpp"
#include "triage/evaluation.hpp"
#include "triage/rng.hpp"

using namespace triage;
using namespace triage::testing;

namespace {

std::vector<Metrics> table1_rows() {
  // Per-class precision/recall/F1 of the published label table, as fractions.
  return {{0.81, 0.81, 0.81}, {0.78, 0.72, 0.74}, {0.79, 0.81, 0.80}};
}

LabelVector random_labels(Rng& rng) {
  LabelVector v;
  for (std::size_t k = 0; k < 3; ++k) v.set(k, rng.bernoulli(0.4));
  return v;
}

}  // namespace

TEST(Confusion, PerfectMultilabel) {
  Rng rng(1);
  std::vector<LabelVector> v;
  for (int i = 0; i < 30; ++i) v.push_back(random_labels(rng));
  const auto c = confusion_multilabel(v, v);
  for (const auto& k : c.per_class) {
    EXPECT_EQ(k.fp, 0u);
    EXPECT_EQ(k.fn, 0u);
  }
}

TEST(Confusion, SingleInstanceMultilabel) {
  const std::vector<LabelVector> p = {{true, false, false}}, t = {{false, true, false}};
  const auto c = confusion_multilabel(p, t);
  EXPECT_EQ(c.per_class[0], (ClassCounts{0, 1, 0, 0}));
  EXPECT_EQ(c.per_class[1], (ClassCounts{0, 0, 1, 0}));
  EXPECT_EQ(c.per_class[2], (ClassCounts{0, 0, 0, 1}));
}

TEST(Confusion, Errors) {
  const std::vector<LabelVector> one = {{}}, two = {{}, {}}, none;
  EXPECT_THROW(confusion_multilabel(one, two), MismatchError);
  EXPECT_THROW(confusion_multilabel(none, none), SizeError);
  const std::vector<std::size_t> p = {0, 3}, t = {0, 1};
  EXPECT_THROW(confusion_multiclass(p, t, 3), ConfigError);
  const std::vector<std::size_t> shorter = {0};
  EXPECT_THROW(confusion_multiclass(shorter, t, 3), MismatchError);
}

TEST(Confusion, MulticlassHandCount) {
  const std::vector<std::size_t> p = {0, 0}, t = {0, 1};
  const auto c = confusion_multiclass(p, t, 2);
  EXPECT_EQ(c.per_class[0].tp, 1u);
  EXPECT_EQ(c.per_class[0].fp, 1u);
  EXPECT_EQ(c.per_class[1].fn, 1u);
  EXPECT_EQ(c.per_class[1].tp, 0u);
}

TEST(Confusion, MulticlassDiagonal) {
  const std::vector<std::size_t> v = {0, 1, 2, 2, 1};
  for (const auto& k : confusion_multiclass(v, v, 3).per_class) {
    EXPECT_EQ(k.fp, 0u);
    EXPECT_EQ(k.fn, 0u);
  }
}

TEST(Confusion, MulticlassSupport) {
  Rng rng(3);
  std::vector<std::size_t> p, t;
  for (int i = 0; i < 100; ++i) {
    p.push_back(rng.below(3));
    t.push_back(rng.below(3));
  }
  const auto c = confusion_multiclass(p, t, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(c.per_class[k].support(), static_cast<std::uint64_t>(std::count(t.begin(), t.end(), k)));
    EXPECT_EQ(c.per_class[k].tp + c.per_class[k].fp + c.per_class[k].fn + c.per_class[k].tn, 100u);
  }
}

TEST(Confusion, AbstentionCountsAsMiss) {
  const std::vector<std::optional<std::size_t>> p = {std::nullopt, 1};
  const std::vector<std::size_t> t = {0, 1};
  const auto c = confusion_multiclass(std::span<const std::optional<std::size_t>>(p), t, 2);
  EXPECT_EQ(c.per_class[0], (ClassCounts{0, 0, 1, 1}));
  EXPECT_EQ(c.per_class[1], (ClassCounts{1, 0, 0, 1}));
}

TEST(Metrics, TwoThirds) {
  const auto m = metrics_from(2, 1, 1);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.f1, 2.0 / 3.0);
}

TEST(Metrics, ZeroDenominators) {
  EXPECT_EQ(metrics_from(0, 0, 0), (Metrics{0.0, 0.0, 0.0}));
  EXPECT_EQ(metrics_from(0, 3, 0), (Metrics{0.0, 0.0, 0.0}));
  EXPECT_DOUBLE_EQ(f1_score(0.0, 0.0), 0.0);
}

TEST(Metrics, PublishedMacroRow) {
  const auto rows = table1_rows();
  const auto macro = macro_average(rows);
  EXPECT_NEAR(macro.f1, 0.7833333333, 1e-9);
  EXPECT_EQ(format_percent(macro.f1), "78%");
  EXPECT_EQ(macro_row_cells(macro), "79% 78% 78%");
}

TEST(Metrics, MacroIsOrderInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Metrics> rows(2 + rng.below(6));
    for (auto& r : rows) r = {rng.uniform(), rng.uniform(), rng.uniform()};
    const auto ref = macro_average(rows);
    for (int k = 0; k < 5; ++k) {
      rng.shuffle(rows);
      EXPECT_EQ(macro_average(rows), ref);
    }
  }
}

TEST(Metrics, F1Bounds) {
  Rng rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto tp = rng.below(20), fp = rng.below(20), fn = rng.below(20);
    const auto m = metrics_from(tp, fp, fn);
    EXPECT_GE(m.f1, 0.0);
    EXPECT_LE(m.f1, std::min(1.0, m.precision + m.recall) + 1e-15);
    EXPECT_LE(m.f1, std::max(m.precision, m.recall) + 1e-15);
    EXPECT_EQ(m.f1 == 0.0, tp == 0);
  }
}

TEST(Metrics, BruteForceRecount) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    if (trial % 2 == 0) {
      std::vector<LabelVector> p, t;
      for (std::size_t i = 0; i < n; ++i) {
        p.push_back(random_labels(rng));
        t.push_back(random_labels(rng));
      }
      const auto rows = recount_multilabel(p, t);
      const auto rep = metrics_from_counts(confusion_multilabel(p, t));
      for (std::size_t k = 0; k < 3; ++k) {
        const auto& c = rep.per_class[k].counts;
        EXPECT_EQ(c, (ClassCounts{rows[k].tp, rows[k].fp, rows[k].fn, rows[k].tn}));
        EXPECT_EQ(rep.per_class[k].metrics.f1, exact_f1(rows[k]));
      }
    } else {
      const std::size_t k_classes = 2 + rng.below(4);
      std::vector<std::optional<std::size_t>> p;
      std::vector<std::size_t> t;
      for (std::size_t i = 0; i < n; ++i) {
        p.push_back(rng.bernoulli(0.1) ? std::nullopt : std::optional<std::size_t>(rng.below(k_classes)));
        t.push_back(rng.below(k_classes));
      }
      const auto rows = recount_multiclass(p, t, k_classes);
      const auto rep = metrics_from_counts(confusion_multiclass(std::span<const std::optional<std::size_t>>(p), t, k_classes));
      for (std::size_t k = 0; k < k_classes; ++k) {
        const auto& c = rep.per_class[k].counts;
        EXPECT_EQ(c, (ClassCounts{rows[k].tp, rows[k].fp, rows[k].fn, rows[k].tn}));
      }
    }
  }
}

TEST(Render, HalfUp) {
  EXPECT_EQ(format_percent(0.7833), "78%");
  EXPECT_EQ(format_percent(0.785), "79%");
  EXPECT_EQ(format_percent(0.0), "0%");
  EXPECT_EQ(format_percent(1.0), "100%");
  EXPECT_EQ(format_percent(0.005), "1%");
  EXPECT_EQ(format_percent(0.0049), "0%");
}

TEST(Render, PerfectReport) {
  const std::vector<LabelVector> v = {{true, false, false}, {false, true, true}};
  const auto rep = metrics_from_counts(confusion_multilabel(v, v), "multilabel3", 0.5);
  EXPECT_EQ(macro_row_cells(rep.macro), "100% 100% 100%");
  const auto text = render_report(rep, ReportFormat::kText);
  EXPECT_NE(text.find("Macro-Average  100%       100%    100%"), std::string::npos) << text;
  EXPECT_NE(text.find("Precision"), std::string::npos);
}

TEST(Render, JsonRoundTrip) {
  Rng rng(9);
  std::vector<LabelVector> p, t;
  for (int i = 0; i < 15; ++i) {
    p.push_back(random_labels(rng));
    t.push_back(random_labels(rng));
  }
  const auto rep = metrics_from_counts(confusion_multilabel(p, t), "multilabel3", 0.5);
  const auto text = render_report(rep, ReportFormat::kJson);
  EXPECT_EQ(report_from_json(nlohmann::json::parse(text)), rep);
  const auto j = nlohmann::json::parse(text);
  for (const char* key : {"task", "n", "threshold", "per_class", "macro", "micro"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_TRUE(j["per_class"]["bug"].contains("tp"));
}

TEST(Evaluate, MajorityBaseline) {
  std::vector<Prediction> preds(10, Prediction{{0.9, 0.1}});
  std::vector<Target> truths;
  for (int i = 0; i < 10; ++i) truths.emplace_back(std::size_t(i % 2));
  const auto rep = evaluate_predictions(TaskConfig::assignment({"a", "b"}), preds, truths, TriagePolicy{});
  EXPECT_NEAR(rep.macro.f1, 1.0 / 3.0, 1e-15);
  EXPECT_FALSE(rep.threshold);
}

TEST(Evaluate, UnreachableThreshold) {
  std::vector<Prediction> preds(4, Prediction{{0.99, 0.7, 1.0}});
  std::vector<Target> truths(4, LabelVector{true, true, true});
  TriagePolicy p;
  p.label_threshold = 1.01;
  const auto rep = evaluate_predictions(TaskConfig::labelling(), preds, truths, p);
  EXPECT_EQ(rep.macro, (Metrics{0.0, 0.0, 0.0}));
  EXPECT_EQ(rep.threshold, 1.01);
}

TEST(Evaluate, PerfectModel) {
  std::vector<Prediction> preds = {{{0.9, 0.1, 0.8}}, {{0.2, 0.6, 0.1}}};
  std::vector<Target> truths = {LabelVector{true, false, true}, LabelVector{false, true, false}};
  const auto rep = evaluate_predictions(TaskConfig::labelling(), preds, truths, TriagePolicy{});
  EXPECT_EQ(rep.macro, (Metrics{1.0, 1.0, 1.0}));
  EXPECT_EQ(rep.n_instances, 2u);
}

TEST(Evaluate, LabelSpaceMismatch) {
  const auto m = init_model(Backend::kLinear, tiny_roster(), tiny_vocab(), 1, tiny_encoder());
  IssueRecord r;
  r.id = 1;
  r.title = "x";
  r.assignee = "stranger";
  EXPECT_THROW(evaluate_model(m, {r}, TriagePolicy{}), MismatchError);
  r.assignee.reset();
  EXPECT_THROW(evaluate_model(m, {r}, TriagePolicy{}), MismatchError);
  r.assignee = "bob";
  EXPECT_EQ(evaluate_model(m, {r}, TriagePolicy{}).n_instances, 1u);
}
