// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slu/attention.hpp"
#include "slu/autograd.hpp"
#include "slu/encoder.hpp"
#include "slu/layers.hpp"
#include "slu/tensor.hpp"

namespace slu {

enum class Architecture { kEncDec, kBiRnn };
enum class Task { kSlot, kIntent, kJoint };

std::string to_string(Architecture a);
std::string to_string(Task t);
Architecture parse_architecture(const std::string& s);
Task parse_task(const std::string& s);

struct ModelConfig {
  Architecture architecture = Architecture::kBiRnn;
  /// EncDec only: feed the aligned encoder state h_i to decoder step i.
  bool aligned_inputs = true;
  bool attention = true;
  Task task = Task::kJoint;
  std::size_t hidden = 128;
  std::size_t embedding_dim = 128;
  std::size_t label_embedding_dim = 128;
  std::size_t att_dim = 128;
  double dropout_keep = 0.5;
  int beam_width = 1;
  double slot_weight = 1.0;
  double intent_weight = 1.0;
  double init_scale = 0.08;

  bool has_slots() const { return task != Task::kIntent; }
  bool has_intent() const { return task != Task::kSlot; }
  /// Throws kConfig. An encoder-decoder without aligned inputs must attend;
  /// otherwise its decoder would never see the input.
  void validate() const;
};

struct ModelDims {
  std::size_t vocab_size = 0;
  std::size_t slot_classes = 0;
  std::size_t intent_classes = 0;

  /// Row of the label-embedding table that stands for "no previous label".
  int bos_label() const { return static_cast<int>(slot_classes); }
};

/// One utterance as class indices. Gold entries may be -1 (unknown to the
/// model); those positions are excluded from the loss.
struct EncodedUtterance {
  std::vector<int> tokens;
  std::vector<int> slots;
  int intent = -1;
};

struct Batch {
  TokenBatch tokens;
  /// slots[t][r]: gold class of row r at step t, -1 past the row's end.
  std::vector<std::vector<int>> slots;
  std::vector<int> intents;

  std::size_t rows() const { return tokens.rows(); }
  std::size_t max_len() const { return tokens.max_len(); }
};

Batch make_batch(std::span<const EncodedUtterance> utterances);
Batch make_batch(std::span<const EncodedUtterance> all, std::span<const std::size_t> indices);

struct ForwardOptions {
  /// kTrain feeds gold previous labels (teacher forcing); kEval feeds the
  /// model's own argmax.
  Mode mode = Mode::kEval;
  /// Dropout is sampled only in kTrain mode and only when this is set.
  Rng* dropout_rng = nullptr;
};

struct ModelOutput {
  /// One [rows x slot_classes] logit block per step; exactly max_len of them.
  std::vector<Var> slot_logits;
  Var intent_logits;
  std::vector<AttentionStep> slot_attention;
  std::vector<AttentionStep> intent_attention;
  /// Label-embedding rows fed at each step (bos_label() at step 0).
  std::vector<std::vector<int>> fed_labels;
  /// Argmax slot class of each step.
  std::vector<std::vector<int>> predicted_slots;
  std::vector<std::string> dropout_sites;
};

struct Decoded {
  std::vector<int> slots;
  int intent = -1;
  /// Sum of the chosen labels' log-probabilities.
  double slot_log_prob = 0.0;
  AttentionRecord slot_attention;
  AttentionRecord intent_attention;
};

/// All model variants behind one interface: the encoder-decoder with or
/// without aligned inputs and attention, and the attention BiRNN, each with
/// slot, intent, or joint heads.
class JointModel {
 public:
  /// Fresh parameters drawn from `rng`.
  JointModel(ModelConfig config, ModelDims dims, Rng& rng);
  /// Adopts existing parameters; names and shapes must match the layout the
  /// config implies.
  JointModel(ModelConfig config, ModelDims dims, ParamStore params);

  const ModelConfig& config() const { return config_; }
  const ModelDims& dims() const { return dims_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Records on `g` with trainable parameters.
  ModelOutput forward(Graph& g, const Batch& batch, const ForwardOptions& options);
  /// Same computation with read-only parameters.
  ModelOutput forward(Graph& g, const Batch& batch, const ForwardOptions& options) const;

  /// slot_weight * sum_t CE(slot_t) + intent_weight * CE(intent), averaged
  /// over the rows of the batch.
  Var loss(Graph& g, const ModelOutput& output, const Batch& batch) const;

  /// Runs forward (mode as given, no dropout) and returns the loss value.
  double evaluate_loss(const Batch& batch, Mode mode = Mode::kTrain) const;

  /// Greedy when beam_width == 1, beam search over label sequences
  /// otherwise. Throws kConfig for beam_width < 1.
  std::vector<Decoded> decode(std::span<const EncodedUtterance> utterances, int beam_width) const;

 private:
  void create_params(Rng& rng);
  ModelOutput forward_impl(Graph& g, ParamBinder& binder, const Batch& batch, const ForwardOptions& options) const;
  Decoded decode_beam(const EncodedUtterance& utterance, int beam_width) const;
  std::vector<Decoded> collect(const Graph& g, const ModelOutput& out, const Batch& batch) const;

  ModelConfig config_;
  ModelDims dims_;
  ParamStore params_;
};

/// log softmax of each row.
Mat log_softmax_rows(const ConstMatMap& logits);

}  // namespace slu
