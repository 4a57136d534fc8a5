#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "triage/classifier/network.hpp"
#include "triage/error.hpp"
#include "triage/rng.hpp"

namespace triage {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(const ModelBundle& m, double learning_rate, AdamConfig cfg = {})
      : lr_(learning_rate), cfg_(cfg), m1_(Gradients::zeros_like(m)), m2_(Gradients::zeros_like(m)) {}

  void step(ModelBundle& model, const Gradients& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto& weights = model.weights();
    for (std::size_t i = 0; i < weights.size(); ++i) {
      m1_.grads[i] = cfg_.beta1 * m1_.grads[i] + (1.0 - cfg_.beta1) * g.grads[i];
      m2_.grads[i] = cfg_.beta2 * m2_.grads[i] + (1.0 - cfg_.beta2) * g.grads[i].cwiseAbs2();
      weights[i].value.array() -=
          lr_ * (m1_.grads[i].array() / c1) / ((m2_.grads[i].array() / c2).sqrt() + cfg_.epsilon);
    }
  }

 private:
  double lr_;
  AdamConfig cfg_;
  Gradients m1_;
  Gradients m2_;
  std::size_t t_ = 0;
};

struct TrainResult {
  ModelBundle model;
  std::vector<double> loss_history;  // mean training loss per epoch
};

/// Called after every epoch with (epoch starting at 1, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Mini-batch Adam. Examples are reshuffled every epoch from a generator
/// seeded with `config.seed`; the same generator drives dropout, so a run is
/// fully determined by (model, data, config).
inline TrainResult train(ModelBundle model, const std::vector<Example>& data, const TrainConfig& config,
                         const EpochCallback& on_epoch = nullptr) {
  config.validate();
  if (data.empty()) throw ConfigError("cannot train on an empty dataset");
  for (const auto& ex : data) detail::check_target(model.task.task, ex.truth, model.task.num_outputs());

  const std::size_t max_seq_len = model.max_seq_len();
  model.train_config = config;
  model.train_config.max_seq_len = max_seq_len;

  Rng rng(config.seed);
  Rng* dropout_rng = (model.backend == Backend::kTransformer && model.encoder->dropout > 0.0) ? &rng : nullptr;
  AdamOptimizer adam(model, config.learning_rate);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  Gradients grads;
  std::vector<Example> batch;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      const double loss = loss_and_gradients(model, batch, grads, dropout_rng);
      if (!std::isfinite(loss)) throw DivergenceError(epoch + 1, batch_index + 1);
      epoch_loss += loss * static_cast<double>(batch.size());
      adam.step(model, grads);
    }
    epoch_loss /= static_cast<double>(data.size());
    result.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch + 1, epoch_loss);
  }
  model.round_to_storage();
  if (!model.all_finite()) throw DivergenceError(config.epochs, 0);
  result.model = std::move(model);
  return result;
}

/// forward() mapped over a batch. The model is not modified.
inline std::vector<Prediction> predict_probs(const ModelBundle& model, std::span<const ModelInput> inputs) {
  std::vector<Prediction> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) out.push_back(forward(model, in));
  return out;
}

}  // namespace triage
