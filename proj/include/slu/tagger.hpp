// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slu/checkpoint.hpp"
#include "slu/data.hpp"
#include "slu/eval.hpp"
#include "slu/model.hpp"

namespace slu {

struct Prediction {
  std::vector<std::string> tokens;
  /// Empty for intent-only models.
  std::vector<std::string> slots;
  std::optional<std::string> intent;
  double slot_log_prob = 0.0;
  AttentionRecord slot_attention;
  AttentionRecord intent_attention;
};

/// Gold labels in a corpus that the model's vocabularies have never seen.
struct VocabCoverage {
  std::size_t distinct_labels = 0;
  std::vector<std::string> unknown_labels;

  /// More than half of the distinct gold labels are unknown.
  bool mismatched() const { return 2 * unknown_labels.size() > distinct_labels; }
};

/// Counts distinct slot labels (when `slots`) and intents (when `intents`).
VocabCoverage vocab_coverage(const Vocabularies& vocab, std::span<const Utterance> corpus, bool slots, bool intents);

/// A model together with the vocabularies that give its classes names.
class Tagger {
 public:
  Tagger(JointModel model, Vocabularies vocab);
  static Tagger from_checkpoint(const Checkpoint& ckpt);

  const JointModel& model() const { return model_; }
  const Vocabularies& vocab() const { return vocab_; }

  std::vector<Prediction> predict(std::span<const std::vector<std::string>> sentences, int beam_width) const;
  std::vector<Prediction> predict(std::span<const Utterance> corpus, int beam_width) const;

  /// Scores predictions against the corpus' gold labels. Labels the model
  /// does not know count as errors.
  EvalReport evaluate(std::span<const Utterance> corpus, int beam_width) const;

 private:
  JointModel model_;
  Vocabularies vocab_;
};

}  // namespace slu
