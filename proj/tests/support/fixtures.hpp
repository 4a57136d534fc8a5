#pragma once

#include <string>
#include <vector>

#include "triage/classifier.hpp"
#include "triage/textproc.hpp"

namespace triage::testing {

inline const std::vector<std::string>& tiny_corpus() {
  static const std::vector<std::string> docs = {
      "app crashes on start [SEP] segfault in parser",
      "add dark mode [SEP] feature request for themes",
      "how do i configure logging [SEP] question about setup",
      "crash when saving file [SEP] stack trace attached",
      "support yaml config [SEP] would be a nice feature",
      "why is start slow [SEP] is this expected"};
  return docs;
}

inline Vocabulary tiny_vocab() { return build_vocab(tiny_corpus(), 1, 1000); }

inline ModelOptions tiny_encoder(std::size_t max_seq_len = 12) {
  ModelOptions o;
  o.encoder.layers = 1;
  o.encoder.hidden_dim = 8;
  o.encoder.heads = 2;
  o.encoder.ff_dim = 16;
  o.encoder.dropout = 0.0;
  o.max_seq_len = max_seq_len;
  o.linear.dim = 8;
  o.linear.buckets = 64;
  return o;
}

inline TaskConfig tiny_roster() { return TaskConfig::assignment({"ann", "bob", "cyd", "dee"}); }

/// Examples pairing the tiny corpus with fixed targets for either task.
inline std::vector<Example> tiny_examples(const ModelBundle& m) {
  std::vector<Example> out;
  const auto& docs = tiny_corpus();
  for (std::size_t i = 0; i < docs.size(); ++i) {
    Target t;
    if (m.task.task == Task::kMultilabel) {
      LabelVector v;
      v.set(i % 3, true);
      if (i == 4) v.set(2, true);
      t = v;
    } else {
      t = i % m.task.num_outputs();
    }
    out.push_back({encode_input(m, docs[i]), t});
  }
  return out;
}

}  // namespace triage::testing
