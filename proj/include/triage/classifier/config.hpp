#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "triage/error.hpp"
#include "triage/labels.hpp"
#include "triage/textproc.hpp"

namespace triage {

enum class Backend { kLinear, kTransformer };
enum class Task { kMultilabel, kMulticlass };

inline std::string to_string(Backend b) { return b == Backend::kLinear ? "linear" : "transformer"; }
inline std::string to_string(Task t) { return t == Task::kMultilabel ? "multilabel3" : "multiclassK"; }

inline Backend backend_from_string(const std::string& s) {
  if (s == "linear") return Backend::kLinear;
  if (s == "transformer") return Backend::kTransformer;
  throw ConfigError("unknown backend: " + s);
}

inline Task task_from_string(const std::string& s) {
  if (s == "multilabel3") return Task::kMultilabel;
  if (s == "multiclassK") return Task::kMulticlass;
  throw ConfigError("unknown task: " + s);
}

struct TaskConfig {
  Task task = Task::kMultilabel;
  std::vector<std::string> label_names;

  std::size_t num_outputs() const { return label_names.size(); }

  static TaskConfig labelling() {
    return {Task::kMultilabel, {std::string(kCategoryNames[0]), std::string(kCategoryNames[1]),
                                std::string(kCategoryNames[2])}};
  }
  static TaskConfig assignment(std::vector<std::string> roster) {
    return {Task::kMulticlass, std::move(roster)};
  }

  void validate() const {
    if (task == Task::kMultilabel && label_names.size() != kNumCategories)
      throw ConfigError("multilabel task needs exactly 3 outputs");
    if (task == Task::kMulticlass && label_names.size() < 2)
      throw ConfigError("multiclass task needs at least 2 classes");
  }

  friend bool operator==(const TaskConfig&, const TaskConfig&) = default;
};

struct TrainConfig {
  std::size_t epochs = 5;
  double learning_rate = 4e-5;
  std::size_t batch_size = 8;
  std::size_t max_seq_len = 128;
  std::uint64_t seed = 0;

  static TrainConfig defaults_for(Backend b) {
    TrainConfig c;
    if (b == Backend::kLinear) c.learning_rate = 0.1;
    return c;
  }

  void validate() const {
    if (epochs == 0 || batch_size == 0 || max_seq_len == 0 || !(learning_rate > 0.0) ||
        !std::isfinite(learning_rate))
      throw ConfigError("training settings must be strictly positive");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t hidden_dim = 64;
  std::size_t heads = 4;
  std::size_t ff_dim = 256;
  double dropout = 0.1;

  std::size_t head_dim() const { return hidden_dim / heads; }

  void validate() const {
    if (layers == 0 || hidden_dim == 0 || heads == 0 || ff_dim == 0)
      throw ConfigError("encoder dimensions must be positive");
    if (hidden_dim % heads != 0)
      throw ConfigError("hidden_dim " + std::to_string(hidden_dim) + " is not divisible by heads " +
                        std::to_string(heads));
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Bag-of-subwords settings: embedding width and hashed n-gram space.
struct LinearConfig {
  std::size_t dim = 16;
  std::uint64_t buckets = 32768;
  NgramRange ngrams{2, 4};

  void validate() const {
    if (dim == 0 || buckets == 0) throw ConfigError("linear dim and buckets must be positive");
    if (ngrams.min == 0 || ngrams.min > ngrams.max) throw ConfigError("invalid n-gram range");
  }

  friend bool operator==(const LinearConfig& a, const LinearConfig& b) {
    return a.dim == b.dim && a.buckets == b.buckets && a.ngrams.min == b.ngrams.min &&
           a.ngrams.max == b.ngrams.max;
  }
};

inline nlohmann::ordered_json to_json(const TaskConfig& c) {
  return {{"task", to_string(c.task)}, {"label_names", c.label_names}};
}
inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_seq_len", c.max_seq_len},
          {"seed", c.seed}};
}
inline nlohmann::ordered_json to_json(const EncoderConfig& c) {
  return {{"layers", c.layers},
          {"hidden_dim", c.hidden_dim},
          {"heads", c.heads},
          {"ff_dim", c.ff_dim},
          {"dropout", c.dropout}};
}
inline nlohmann::ordered_json to_json(const LinearConfig& c) {
  return {{"dim", c.dim}, {"buckets", c.buckets}, {"ngram_min", c.ngrams.min}, {"ngram_max", c.ngrams.max}};
}

inline TaskConfig task_config_from_json(const nlohmann::json& j) {
  TaskConfig c{task_from_string(j.at("task").get<std::string>()),
               j.at("label_names").get<std::vector<std::string>>()};
  c.validate();
  return c;
}
inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}
inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ff_dim = j.at("ff_dim").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.validate();
  return c;
}
inline LinearConfig linear_config_from_json(const nlohmann::json& j) {
  LinearConfig c;
  c.dim = j.at("dim").get<std::size_t>();
  c.buckets = j.at("buckets").get<std::uint64_t>();
  c.ngrams.min = j.at("ngram_min").get<std::size_t>();
  c.ngrams.max = j.at("ngram_max").get<std::size_t>();
  c.validate();
  return c;
}

}  // namespace triage
