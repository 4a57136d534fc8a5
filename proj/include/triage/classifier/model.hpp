#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "triage/classifier/config.hpp"
#include "triage/error.hpp"
#include "triage/labels.hpp"
#include "triage/rng.hpp"
#include "triage/textproc.hpp"

namespace triage {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Named parameter. Rank-1 tensors are held as a 1 x n matrix.
struct Tensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  Mat value;
};

/// Sorted feature indices for the linear backend: word ids below the
/// vocabulary size, hashed n-gram buckets above it.
struct BagOfFeatures {
  std::vector<std::uint32_t> indices;

  friend bool operator==(const BagOfFeatures&, const BagOfFeatures&) = default;
};

using ModelInput = std::variant<TokenSequence, BagOfFeatures>;

/// Ground truth: a LabelVector for the multilabel task, a class index otherwise.
using Target = std::variant<LabelVector, std::size_t>;

struct Prediction {
  std::vector<double> probs;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Everything needed to run a trained classifier.
class ModelBundle {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  Backend backend = Backend::kLinear;
  TaskConfig task;
  std::optional<EncoderConfig> encoder;  // transformer only
  LinearConfig linear;                   // linear only
  TrainConfig train_config;              // settings of the last training run
  Vocabulary vocab;

  const std::vector<Tensor>& weights() const { return weights_; }
  std::vector<Tensor>& weights() { return weights_; }

  void add_tensor(std::string name, std::vector<std::uint64_t> dims, Mat value) {
    index_.emplace(name, weights_.size());
    weights_.push_back({std::move(name), std::move(dims), std::move(value)});
  }

  void set_weights(std::vector<Tensor> tensors) {
    weights_ = std::move(tensors);
    index_.clear();
    for (std::size_t i = 0; i < weights_.size(); ++i) index_.emplace(weights_[i].name, i);
  }

  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw MismatchError("model has no tensor named " + std::string(name));
    return it->second;
  }

  const Mat& param(std::string_view name) const { return weights_[index_of(name)].value; }
  Mat& param(std::string_view name) { return weights_[index_of(name)].value; }

  std::size_t max_seq_len() const { return train_config.max_seq_len; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : weights_) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  bool all_finite() const {
    return std::all_of(weights_.begin(), weights_.end(),
                       [](const Tensor& t) { return t.value.allFinite(); });
  }

  /// Rounds every weight to single precision, the stored representation.
  void round_to_storage() {
    for (auto& t : weights_) {
      t.value = t.value.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    }
  }

 private:
  std::vector<Tensor> weights_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Options for init_model that have sensible defaults.
struct ModelOptions {
  EncoderConfig encoder;
  LinearConfig linear;
  std::size_t max_seq_len = 128;
};

namespace detail {

inline Mat uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double limit) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

inline Mat glorot(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
  return uniform_matrix(rng, fan_in, fan_out,
                        std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

inline constexpr double kEmbeddingInitRange = 0.05;

}  // namespace detail

/// Parameter names and shapes depend only on the configs; values are drawn
/// from a generator seeded with `seed`.
inline ModelBundle init_model(Backend backend, TaskConfig task, const Vocabulary& vocab,
                              std::uint64_t seed, const ModelOptions& options = {}) {
  task.validate();
  if (options.max_seq_len == 0) throw ConfigError("max_seq_len must be positive");
  ModelBundle m;
  m.backend = backend;
  m.task = std::move(task);
  m.vocab = vocab;
  m.train_config.max_seq_len = options.max_seq_len;
  m.train_config.seed = seed;
  Rng rng(seed);
  const auto k = m.task.num_outputs();
  using detail::glorot;
  using detail::kEmbeddingInitRange;
  using detail::uniform_matrix;
  auto u64 = [](std::size_t v) { return static_cast<std::uint64_t>(v); };

  if (backend == Backend::kLinear) {
    options.linear.validate();
    m.linear = options.linear;
    const std::size_t rows = vocab.size() + options.linear.buckets;
    const std::size_t d = options.linear.dim;
    m.add_tensor("embedding", {u64(rows), u64(d)}, uniform_matrix(rng, rows, d, kEmbeddingInitRange));
    m.add_tensor("head.weight", {u64(d), u64(k)}, glorot(rng, d, k));
    m.add_tensor("head.bias", {u64(k)}, Mat::Zero(1, static_cast<Eigen::Index>(k)));
  } else {
    options.encoder.validate();
    m.encoder = options.encoder;
    const auto& e = options.encoder;
    const std::size_t d = e.hidden_dim;
    const auto di = static_cast<Eigen::Index>(d);
    const auto fi = static_cast<Eigen::Index>(e.ff_dim);
    m.add_tensor("embedding", {u64(vocab.size()), u64(d)},
                 uniform_matrix(rng, vocab.size(), d, kEmbeddingInitRange));
    for (std::size_t l = 0; l < e.layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      for (const char* w : {"wq", "wk", "wv", "wo"}) {
        m.add_tensor(p + "attn." + w, {u64(d), u64(d)}, glorot(rng, d, d));
        m.add_tensor(p + "attn.b" + std::string(w + 1), {u64(d)}, Mat::Zero(1, di));
      }
      m.add_tensor(p + "ln1.gamma", {u64(d)}, Mat::Ones(1, di));
      m.add_tensor(p + "ln1.beta", {u64(d)}, Mat::Zero(1, di));
      m.add_tensor(p + "ff.w1", {u64(d), u64(e.ff_dim)}, glorot(rng, d, e.ff_dim));
      m.add_tensor(p + "ff.b1", {u64(e.ff_dim)}, Mat::Zero(1, fi));
      m.add_tensor(p + "ff.w2", {u64(e.ff_dim), u64(d)}, glorot(rng, e.ff_dim, d));
      m.add_tensor(p + "ff.b2", {u64(d)}, Mat::Zero(1, di));
      m.add_tensor(p + "ln2.gamma", {u64(d)}, Mat::Ones(1, di));
      m.add_tensor(p + "ln2.beta", {u64(d)}, Mat::Zero(1, di));
    }
    m.add_tensor("head.weight", {u64(d), u64(k)}, glorot(rng, d, k));
    m.add_tensor("head.bias", {u64(k)}, Mat::Zero(1, static_cast<Eigen::Index>(k)));
  }
  m.round_to_storage();
  return m;
}

/// Word ids plus hashed n-gram buckets of the normalized text, sorted so the
/// bag is independent of word order.
inline BagOfFeatures bag_of_features(std::string_view text, const Vocabulary& vocab,
                                     const LinearConfig& cfg) {
  const std::string norm = normalize_text(text);
  BagOfFeatures bag;
  const auto words = split_words(norm);
  for (const auto& w : words) {
    bag.indices.push_back(static_cast<std::uint32_t>(w == kSepToken ? kSepId : vocab.id_of(w)));
  }
  const auto offset = static_cast<std::uint64_t>(vocab.size());
  for (std::uint64_t b : hash_ngrams(norm, cfg.ngrams, cfg.buckets)) {
    bag.indices.push_back(static_cast<std::uint32_t>(offset + b));
  }
  std::sort(bag.indices.begin(), bag.indices.end());
  return bag;
}

/// Turns raw text (already title/body-concatenated) into the model's input type.
inline ModelInput encode_input(const ModelBundle& model, std::string_view text) {
  if (model.backend == Backend::kLinear) return bag_of_features(text, model.vocab, model.linear);
  return encode_sequence(text, model.vocab, model.max_seq_len());
}

}  // namespace triage
