#pragma once

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "triage/classifier/model.hpp"
#include "triage/error.hpp"

namespace triage {

inline constexpr double kProbClamp = 1e-12;

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Numerically stable softmax (max-shifted).
inline std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - mx));
  for (double& v : p) v /= sum;
  return p;
}

inline Prediction apply_head(Task task, const std::vector<double>& logits) {
  Prediction p;
  if (task == Task::kMultilabel) {
    p.probs.resize(logits.size());
    std::transform(logits.begin(), logits.end(), p.probs.begin(), sigmoid);
  } else {
    p.probs = softmax(logits);
  }
  return p;
}

namespace detail {

inline void check_target(Task task, const Target& truth, std::size_t num_outputs) {
  if (task == Task::kMultilabel) {
    if (!std::holds_alternative<LabelVector>(truth))
      throw MismatchError("multilabel task needs a LabelVector target");
    if (num_outputs != kNumCategories) throw MismatchError("multilabel prediction must have 3 outputs");
  } else {
    if (!std::holds_alternative<std::size_t>(truth))
      throw MismatchError("multiclass task needs a class index target");
    const auto idx = std::get<std::size_t>(truth);
    if (idx >= num_outputs)
      throw ConfigError("class index " + std::to_string(idx) + " out of range for " +
                        std::to_string(num_outputs) + " classes");
  }
}

}  // namespace detail

/// Multilabel: mean binary cross-entropy over the three outputs.
/// Multiclass: negative log-probability of the true class.
/// Probabilities are clamped at 1e-12 before the logarithm.
inline double compute_loss(Task task, const Prediction& pred, const Target& truth) {
  detail::check_target(task, truth, pred.probs.size());
  if (task == Task::kMultilabel) {
    const auto& y = std::get<LabelVector>(truth);
    double loss = 0.0;
    for (std::size_t i = 0; i < kNumCategories; ++i) {
      const double p = pred.probs[i];
      loss -= y[i] ? std::log(std::max(p, kProbClamp)) : std::log(std::max(1.0 - p, kProbClamp));
    }
    return loss / static_cast<double>(kNumCategories);
  }
  return -std::log(std::max(pred.probs[std::get<std::size_t>(truth)], kProbClamp));
}

/// d loss / d logits for compute_loss, honouring the clamp (zero slope where
/// the clamp is active).
inline std::vector<double> loss_gradient(Task task, const Prediction& pred, const Target& truth) {
  detail::check_target(task, truth, pred.probs.size());
  std::vector<double> g(pred.probs.size(), 0.0);
  if (task == Task::kMultilabel) {
    const auto& y = std::get<LabelVector>(truth);
    for (std::size_t i = 0; i < kNumCategories; ++i) {
      const double p = pred.probs[i];
      if (y[i]) {
        if (p > kProbClamp) g[i] = -(1.0 - p);
      } else {
        if (1.0 - p > kProbClamp) g[i] = p;
      }
      g[i] /= static_cast<double>(kNumCategories);
    }
    return g;
  }
  const auto t = std::get<std::size_t>(truth);
  if (pred.probs[t] <= kProbClamp) return g;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = pred.probs[i] - (i == t ? 1.0 : 0.0);
  return g;
}

}  // namespace triage
