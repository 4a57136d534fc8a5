#pragma once

// Independent reference computations used by the tests.

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "triage/labels.hpp"

namespace triage::testing {

/// Exact rational p = num / den (den 0 means the metric is 0 by convention).
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 0;
  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
};

struct RecountRow {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Per-instance, per-class recount with no shared code paths.
inline std::vector<RecountRow> recount_multilabel(const std::vector<LabelVector>& pred,
                                                  const std::vector<LabelVector>& truth) {
  std::vector<RecountRow> rows(3);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p[3] = {pred[i].bug, pred[i].enhancement, pred[i].question};
    const bool t[3] = {truth[i].bug, truth[i].enhancement, truth[i].question};
    for (int c = 0; c < 3; ++c) {
      if (p[c] && t[c]) ++rows[c].tp;
      if (p[c] && !t[c]) ++rows[c].fp;
      if (!p[c] && t[c]) ++rows[c].fn;
      if (!p[c] && !t[c]) ++rows[c].tn;
    }
  }
  return rows;
}

inline std::vector<RecountRow> recount_multiclass(const std::vector<std::optional<std::size_t>>& pred,
                                                  const std::vector<std::size_t>& truth, std::size_t k) {
  std::vector<RecountRow> rows(k);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const bool p = pred[i].has_value() && *pred[i] == c;
      const bool t = truth[i] == c;
      if (p && t) ++rows[c].tp;
      if (p && !t) ++rows[c].fp;
      if (!p && t) ++rows[c].fn;
      if (!p && !t) ++rows[c].tn;
    }
  }
  return rows;
}

/// F1 as an exact fraction 2tp / (2tp + fp + fn), then one division.
inline double exact_f1(const RecountRow& r) {
  const std::uint64_t den = 2 * r.tp + r.fp + r.fn;
  return r.tp == 0 || den == 0 ? 0.0 : static_cast<double>(2 * r.tp) / static_cast<double>(den);
}

inline Ratio precision_ratio(const RecountRow& r) { return {r.tp, r.tp + r.fp}; }
inline Ratio recall_ratio(const RecountRow& r) { return {r.tp, r.tp + r.fn}; }
inline Ratio f1_ratio(const RecountRow& r) { return {2 * r.tp, 2 * r.tp + r.fp + r.fn}; }
inline double exact_precision(const RecountRow& r) { return precision_ratio(r).value(); }
inline double exact_recall(const RecountRow& r) { return recall_ratio(r).value(); }

/// Mean of fractions n_i/d_i (d_i = 0 counts as 0) kept as one exact
/// fraction until the final division.
inline long double exact_mean(const std::vector<Ratio>& xs) {
  using U = unsigned __int128;
  auto gcd = [](U a, U b) {
    while (b != 0) {
      const U t = a % b;
      a = b;
      b = t;
    }
    return a;
  };
  U num = 0, den = 1;
  for (const auto& x : xs) {
    if (x.den == 0 || x.num == 0) continue;
    num = num * x.den + den * x.num;
    den *= x.den;
    const U g = gcd(num, den);
    num /= g;
    den /= g;
  }
  if (xs.empty()) return 0.0L;
  den *= xs.size();
  return static_cast<long double>(num) / static_cast<long double>(den);
}

/// Reference FNV-1a 64, written from the published parameters.
inline std::uint64_t fnv1a_reference(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace triage::testing
