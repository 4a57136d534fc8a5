#pragma once

// Records in, trained model out.

#include <string>
#include <vector>

#include "triage/classifier.hpp"
#include "triage/corpus.hpp"
#include "triage/evaluation.hpp"
#include "triage/textproc.hpp"

namespace triage {

struct VocabOptions {
  std::size_t min_frequency = 2;
  std::size_t max_size = 30000;
};

inline std::vector<std::string> record_texts(const std::vector<IssueRecord>& records) {
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(concat_title_body(r.title, r.body));
  return texts;
}

inline std::vector<Example> make_examples(const ModelBundle& model, const std::vector<IssueRecord>& records) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records)
    out.push_back({encode_input(model, concat_title_body(r.title, r.body)), target_for(model.task, r)});
  return out;
}

/// Vocabulary from the training records only, then a seeded initialization.
inline TrainResult fit(Backend backend, const TaskConfig& task, const std::vector<IssueRecord>& train_records,
                       const TrainConfig& config, ModelOptions options = {}, const VocabOptions& vocab = {},
                       const EpochCallback& on_epoch = nullptr) {
  if (train_records.empty()) throw ConfigError("no training records");
  options.max_seq_len = config.max_seq_len;
  const Vocabulary v = build_vocab(record_texts(train_records), vocab.min_frequency, vocab.max_size);
  ModelBundle model = init_model(backend, task, v, config.seed, options);
  const auto examples = make_examples(model, train_records);
  return train(std::move(model), examples, config, on_epoch);
}

}  // namespace triage
