// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "slu/data.hpp"
#include "slu/model.hpp"
#include "slu/tensor.hpp"

namespace slu::testing {

inline Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

inline Tensor& random_param(ParamStore& store, const std::string& name, std::vector<std::size_t> shape, Rng& rng,
                            double scale = 1.0) {
  Tensor& t = store.add(name, std::move(shape));
  for (double& x : t.data()) x = rng.uniform(-scale, scale);
  return t;
}

/// Tiny dimensions so finite differences stay cheap.
inline ModelConfig tiny_config(Architecture arch, bool aligned, bool attention, Task task) {
  ModelConfig c;
  c.architecture = arch;
  c.aligned_inputs = aligned;
  c.attention = attention;
  c.task = task;
  c.hidden = 3;
  c.embedding_dim = 4;
  c.label_embedding_dim = 3;
  c.att_dim = 3;
  c.dropout_keep = 1.0;
  c.init_scale = 0.5;
  return c;
}

struct NamedConfig {
  std::string name;
  ModelConfig config;
};

/// Every architecture/attention variant, each with the given task.
inline std::vector<NamedConfig> all_variants(Task task) {
  return {
      {"encdec_a", tiny_config(Architecture::kEncDec, false, true, task)},
      {"encdec_b", tiny_config(Architecture::kEncDec, true, false, task)},
      {"encdec_c", tiny_config(Architecture::kEncDec, true, true, task)},
      {"birnn_att", tiny_config(Architecture::kBiRnn, true, true, task)},
      {"birnn_mean", tiny_config(Architecture::kBiRnn, true, false, task)},
  };
}

inline EncodedUtterance random_utterance(Rng& rng, std::size_t length, const ModelDims& dims) {
  EncodedUtterance u;
  for (std::size_t t = 0; t < length; ++t) {
    u.tokens.push_back(static_cast<int>(rng.below(dims.vocab_size)));
    u.slots.push_back(static_cast<int>(rng.below(dims.slot_classes)));
  }
  u.intent = static_cast<int>(rng.below(dims.intent_classes));
  return u;
}

inline Utterance make_utterance(std::vector<std::string> tokens, std::vector<std::string> slots, std::string intent) {
  return Utterance{std::move(tokens), std::move(slots), std::move(intent)};
}

}  // namespace slu::testing
