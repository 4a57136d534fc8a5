#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "triage/classifier.hpp"
#include "triage/rng.hpp"

namespace triage::testing {

struct GradCheckResult {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
};

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-7) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences on `samples` randomly chosen scalar parameters. Half
/// of the samples are drawn among entries with a nonzero analytic gradient so
/// the check is not dominated by unused embedding rows.
inline GradCheckResult gradient_check(ModelBundle model, std::span<const Example> batch, std::size_t samples,
                                      std::uint64_t seed, double h = 1e-4) {
  Gradients g;
  loss_and_gradients(model, batch, g);
  struct Coord {
    std::size_t t;
    Eigen::Index i;
  };
  std::vector<Coord> all, active;
  for (std::size_t t = 0; t < model.weights().size(); ++t) {
    for (Eigen::Index i = 0; i < model.weights()[t].value.size(); ++i) {
      all.push_back({t, i});
      if (g.grads[t].data()[i] != 0.0) active.push_back({t, i});
    }
  }
  Rng rng(seed);
  GradCheckResult res;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto& pool = (s % 2 == 0 && !active.empty()) ? active : all;
    const Coord c = pool[rng.below(pool.size())];
    double& w = model.weights()[c.t].value.data()[c.i];
    const double saved = w;
    w = saved + h;
    const double up = mean_loss(model, batch);
    w = saved - h;
    const double down = mean_loss(model, batch);
    w = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double analytic = g.grads[c.t].data()[c.i];
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic, numeric));
    res.max_abs_analytic = std::max(res.max_abs_analytic, std::abs(analytic));
    ++res.checked;
  }
  return res;
}

}  // namespace triage::testing
