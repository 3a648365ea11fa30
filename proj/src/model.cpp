// SPDX-License-Identifier: Apache-2.0
#include "slu/model.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "slu/beam.hpp"
#include "slu/error.hpp"

namespace slu {

std::string to_string(Architecture a) { return a == Architecture::kEncDec ? "encdec" : "birnn"; }

std::string to_string(Task t) {
  switch (t) {
    case Task::kSlot:
      return "slot";
    case Task::kIntent:
      return "intent";
    case Task::kJoint:
      return "joint";
  }
  return "joint";
}

Architecture parse_architecture(const std::string& s) {
  if (s == "encdec") return Architecture::kEncDec;
  if (s == "birnn") return Architecture::kBiRnn;
  throw_error(ErrorKind::kConfig, "unknown architecture '" + s + "' (expected encdec or birnn)");
}

Task parse_task(const std::string& s) {
  if (s == "slot") return Task::kSlot;
  if (s == "intent") return Task::kIntent;
  if (s == "joint") return Task::kJoint;
  throw_error(ErrorKind::kConfig, "unknown task '" + s + "' (expected slot, intent or joint)");
}

void ModelConfig::validate() const {
  if (architecture == Architecture::kEncDec && !aligned_inputs && !attention) {
    throw_error(ErrorKind::kConfig,
                "encoder-decoder without aligned inputs must use attention: the variants are (a) attention only, "
                "(b) aligned inputs, (c) aligned inputs with attention");
  }
  if (hidden < 1 || embedding_dim < 1 || label_embedding_dim < 1 || att_dim < 1) {
    throw_error(ErrorKind::kConfig, "model dimensions must be positive");
  }
  if (!(dropout_keep > 0.0 && dropout_keep <= 1.0)) throw_error(ErrorKind::kConfig, "dropout_keep must be in (0, 1]");
  if (beam_width < 1) throw_error(ErrorKind::kConfig, "beam_width must be at least 1");
  if (!(init_scale > 0.0)) throw_error(ErrorKind::kConfig, "init_scale must be positive");
  if (slot_weight < 0.0 || intent_weight < 0.0) throw_error(ErrorKind::kConfig, "loss weights must be non-negative");
}

Batch make_batch(std::span<const EncodedUtterance> utterances) {
  std::vector<std::size_t> idx(utterances.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(utterances, idx);
}

Batch make_batch(std::span<const EncodedUtterance> all, std::span<const std::size_t> indices) {
  if (indices.empty()) throw_error(ErrorKind::kDomain, "make_batch: empty batch");
  std::size_t max_len = 0;
  for (auto i : indices) {
    const auto& u = all[i];
    if (u.tokens.empty()) throw_error(ErrorKind::kDomain, "make_batch: empty utterance");
    if (!u.slots.empty() && u.slots.size() != u.tokens.size()) {
      throw_error(ErrorKind::kDimension, "make_batch: token and slot counts differ");
    }
    max_len = std::max(max_len, u.tokens.size());
  }
  Batch b;
  const std::size_t rows = indices.size();
  b.tokens.steps.assign(max_len, std::vector<int>(rows, 0));
  b.slots.assign(max_len, std::vector<int>(rows, -1));
  b.tokens.lengths.resize(rows);
  b.intents.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& u = all[indices[r]];
    b.tokens.lengths[r] = static_cast<int>(u.tokens.size());
    b.intents[r] = u.intent;
    for (std::size_t t = 0; t < u.tokens.size(); ++t) {
      b.tokens.steps[t][r] = u.tokens[t];
      if (!u.slots.empty()) b.slots[t][r] = u.slots[t];
    }
  }
  return b;
}

Mat log_softmax_rows(const ConstMatMap& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    const double lse = top + std::log((logits.row(r).array() - top).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

namespace {

// Parameter layout shared by construction and checkpoint validation.
struct Layout {
  EncoderParams encoder;
  DenseParams decoder_init;
  EmbeddingTable label_embedding;
  LstmParams decoder_lstm;
  AttentionParams slot_attention;
  DenseParams slot_out;
  AttentionParams intent_attention;
  LstmParams intent_lstm;
  DenseParams intent_out;
  std::string intent_query;
};

Layout layout_for(const ModelConfig& c, const ModelDims& d) {
  Layout l;
  const std::size_t h = c.hidden;
  const std::size_t state = 2 * h;
  const bool birnn = c.architecture == Architecture::kBiRnn;
  l.encoder.embedding = {"embedding", d.vocab_size, c.embedding_dim};
  l.encoder.forward = {"encoder.fw", c.embedding_dim + (birnn && c.has_slots() ? c.label_embedding_dim : 0), h};
  l.encoder.backward = {"encoder.bw", c.embedding_dim, h};
  if (birnn) {
    l.label_embedding = {"label_embedding", d.slot_classes + 1, c.label_embedding_dim};
    l.slot_attention = {"slot.attention", state, state, c.att_dim};
    l.slot_out = {"slot.out", c.attention ? 2 * state : state, d.slot_classes};
    l.intent_query = "intent.query";
    l.intent_attention = {"intent.attention", h, state, c.att_dim};
    l.intent_out = {"intent.out", state, d.intent_classes};
  } else {
    l.decoder_init = {"decoder.init", h, h};
    l.label_embedding = {"decoder.label_embedding", d.slot_classes + 1, c.label_embedding_dim};
    const std::size_t in =
        c.label_embedding_dim + (c.aligned_inputs ? state : 0) + (c.attention ? state : 0);
    l.decoder_lstm = {"decoder.lstm", in, h};
    l.slot_attention = {"decoder.attention", h, state, c.att_dim};
    l.slot_out = {"decoder.out", h, d.slot_classes};
    l.intent_attention = {"intent.attention", h, state, c.att_dim};
    l.intent_lstm = {"intent.lstm", state, h};
    l.intent_out = {"intent.out", h, d.intent_classes};
  }
  return l;
}

// Expected (name, shape) pairs for a config; used to validate loaded
// parameters.
std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_shapes(const ModelConfig& c,
                                                                              const ModelDims& d) {
  Layout l = layout_for(c, d);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  auto lstm = [&](const LstmParams& p) {
    out.push_back({p.name + ".wx", {p.input_dim, 4 * p.hidden}});
    out.push_back({p.name + ".wh", {p.hidden, 4 * p.hidden}});
    out.push_back({p.name + ".b", {4 * p.hidden}});
  };
  auto dense = [&](const DenseParams& p) {
    out.push_back({p.name + ".w", {p.input_dim, p.output_dim}});
    out.push_back({p.name + ".b", {p.output_dim}});
  };
  auto att = [&](const AttentionParams& p) {
    out.push_back({p.name + ".ws", {p.query_dim, p.att_dim}});
    out.push_back({p.name + ".wh", {p.key_dim, p.att_dim}});
    out.push_back({p.name + ".v", {p.att_dim}});
  };
  out.push_back({l.encoder.embedding.name, {l.encoder.embedding.vocab_size, l.encoder.embedding.dim}});
  lstm(l.encoder.forward);
  lstm(l.encoder.backward);
  const bool birnn = c.architecture == Architecture::kBiRnn;
  if (!birnn) dense(l.decoder_init);
  if (c.has_slots()) {
    out.push_back({l.label_embedding.name, {l.label_embedding.vocab_size, l.label_embedding.dim}});
    if (!birnn) lstm(l.decoder_lstm);
    if (c.attention) att(l.slot_attention);
    dense(l.slot_out);
  }
  if (c.has_intent()) {
    if (c.attention) att(l.intent_attention);
    if (birnn && c.attention) out.push_back({l.intent_query, {c.hidden}});
    if (!birnn) lstm(l.intent_lstm);
    dense(l.intent_out);
  }
  return out;
}

// Constant [rows x T] weights averaging each row over its real length.
Mat mean_weights(const TokenBatch& batch) {
  Mat w = Mat::Zero(static_cast<Eigen::Index>(batch.rows()), static_cast<Eigen::Index>(batch.max_len()));
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    const int len = batch.lengths[r];
    for (int j = 0; j < len; ++j) w(static_cast<Eigen::Index>(r), j) = 1.0 / len;
  }
  return w;
}

class SlotStepper {
 public:
  virtual ~SlotStepper() = default;
  /// Logits for step t given the label fed from step t-1.
  virtual Var step(std::size_t t, std::span<const int> previous) = 0;
  virtual void reorder(std::span<const int> rows) = 0;
  const std::vector<AttentionStep>& attention() const { return attention_; }

 protected:
  std::vector<AttentionStep> attention_;
};

class EncDecStepper : public SlotStepper {
 public:
  EncDecStepper(Graph& g, ParamBinder& binder, const ModelConfig& config, const Layout& layout,
                const EncoderStates& enc, LstmState s0, const TokenBatch& batch, Dropout& dropout)
      : g_(g), config_(config), layout_(layout), enc_(enc), state_(s0), dropout_(dropout) {
    labels_ = binder(layout.label_embedding.name);
    lstm_ = bind(binder, layout.decoder_lstm);
    out_w_ = binder(layout.slot_out.name + ".w");
    out_b_ = binder(layout.slot_out.name + ".b");
    if (config.attention) {
      att_ = bind(binder, layout.slot_attention);
      memory_ = make_memory(g, att_, enc.states, batch.lengths);
    }
  }

  Var step(std::size_t t, std::span<const int> previous) override {
    std::vector<Var> parts{embed(g_, labels_, previous)};
    if (config_.aligned_inputs) parts.push_back(enc_.states[t]);
    if (config_.attention) {
      AttentionStep a = attend(g_, att_, state_.h, memory_);
      attention_.push_back(a);
      parts.push_back(a.context);
    }
    state_ = lstm_step(g_, lstm_, concat(g_, parts), state_);
    Var features = dropout_.apply(g_, state_.h, "decoder.output");
    return feed_forward(g_, features, out_w_, out_b_, Activation::kNone);
  }

  void reorder(std::span<const int> rows) override {
    state_.h = gather_rows(g_, state_.h, rows);
    state_.c = gather_rows(g_, state_.c, rows);
  }

 private:
  Graph& g_;
  const ModelConfig& config_;
  const Layout& layout_;
  const EncoderStates& enc_;
  LstmState state_;
  Dropout& dropout_;
  Var labels_, out_w_, out_b_;
  BoundLstm lstm_;
  BoundAttention att_;
  AttentionMemory memory_;
};

// Forward RNN of the BiRNN with the previous label as extra input. The
// attention memory holds h_1..h_t at step t: later forward states depend on
// labels not yet emitted.
class BiRnnStepper : public SlotStepper {
 public:
  BiRnnStepper(Graph& g, ParamBinder& binder, const ModelConfig& config, const Layout& layout,
               std::span<const Var> inputs, std::span<const Var> backward, const TokenBatch& batch, Dropout& dropout)
      : g_(g), config_(config), inputs_(inputs), backward_(backward), batch_(batch), dropout_(dropout) {
    labels_ = binder(layout.label_embedding.name);
    lstm_ = bind(binder, layout.encoder.forward);
    out_w_ = binder(layout.slot_out.name + ".w");
    out_b_ = binder(layout.slot_out.name + ".b");
    if (config.attention) att_ = bind(binder, layout.slot_attention);
    state_ = lstm_zero_state(g, batch.rows(), lstm_.hidden);
    ragged_ = batch.ragged();
  }

  Var step(std::size_t t, std::span<const int> previous) override {
    Var x = concat(g_, {inputs_[t], embed(g_, labels_, previous)});
    LstmState next = lstm_step(g_, lstm_, x, state_);
    if (ragged_) {
      auto keep = batch_.valid_at(t);
      next.h = blend_rows(g_, next.h, state_.h, keep);
      next.c = blend_rows(g_, next.c, state_.c, keep);
    }
    state_ = next;
    Var h = concat(g_, {state_.h, backward_[t]});
    history_.push_back(h);
    Var features = h;
    if (config_.attention) {
      append_memory(g_, att_, memory_, h);
      AttentionStep a = attend(g_, att_, h, memory_);
      attention_.push_back(a);
      features = concat(g_, {h, a.context});
    }
    features = dropout_.apply(g_, features, "slot.output");
    return feed_forward(g_, features, out_w_, out_b_, Activation::kNone);
  }

  void reorder(std::span<const int> rows) override {
    state_.h = gather_rows(g_, state_.h, rows);
    state_.c = gather_rows(g_, state_.c, rows);
    for (auto& h : history_) h = gather_rows(g_, h, rows);
    for (auto& v : memory_.values) v = gather_rows(g_, v, rows);
    for (auto& k : memory_.keys) k = gather_rows(g_, k, rows);
  }

  const std::vector<Var>& history() const { return history_; }

 private:
  Graph& g_;
  const ModelConfig& config_;
  std::span<const Var> inputs_;
  std::span<const Var> backward_;
  const TokenBatch& batch_;
  Dropout& dropout_;
  Var labels_, out_w_, out_b_;
  BoundLstm lstm_;
  BoundAttention att_;
  AttentionMemory memory_;
  LstmState state_;
  std::vector<Var> history_;
  bool ragged_ = false;
};

// Runs the stepper over every position, feeding gold labels in training mode
// and the argmax otherwise.
void run_slot_decoder(SlotStepper& stepper, Graph& g, const Batch& batch, const ModelDims& dims, Mode mode,
                      ModelOutput& out) {
  const std::size_t rows = batch.rows();
  std::vector<int> previous(rows, dims.bos_label());
  for (std::size_t t = 0; t < batch.max_len(); ++t) {
    out.fed_labels.push_back(previous);
    Var logits = stepper.step(t, previous);
    out.slot_logits.push_back(logits);
    std::vector<int> predicted = argmax_rows(g.value(logits));
    if (mode == Mode::kTrain) {
      for (std::size_t r = 0; r < rows; ++r) {
        const int gold = batch.slots[t][r];
        previous[r] = gold >= 0 ? gold : dims.bos_label();
      }
    } else {
      previous = predicted;
    }
    out.predicted_slots.push_back(std::move(predicted));
  }
  out.slot_attention = stepper.attention();
}

}  // namespace

JointModel::JointModel(ModelConfig config, ModelDims dims, Rng& rng) : config_(config), dims_(dims) {
  config_.validate();
  if (dims_.vocab_size < 1) throw_error(ErrorKind::kConfig, "vocabulary must not be empty");
  if (config_.has_slots() && dims_.slot_classes < 1) throw_error(ErrorKind::kConfig, "no slot classes");
  if (config_.has_intent() && dims_.intent_classes < 1) throw_error(ErrorKind::kConfig, "no intent classes");
  create_params(rng);
}

JointModel::JointModel(ModelConfig config, ModelDims dims, ParamStore params)
    : config_(config), dims_(dims), params_(std::move(params)) {
  config_.validate();
  auto expected = expected_shapes(config_, dims_);
  if (expected.size() != params_.size()) {
    throw_error(ErrorKind::kConfig, "parameter set has " + std::to_string(params_.size()) + " tensors, config implies " +
                                        std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    if (!params_.contains(name)) throw_error(ErrorKind::kConfig, "missing parameter '" + name + "'");
    if (params_.at(name).shape() != shape) {
      throw_error(ErrorKind::kConfig, "parameter '" + name + "' has shape " + shape_string(params_.at(name).shape()) +
                                          ", expected " + shape_string(shape));
    }
  }
}

void JointModel::create_params(Rng& rng) {
  const Layout l = layout_for(config_, dims_);
  const double s = config_.init_scale;
  const bool birnn = config_.architecture == Architecture::kBiRnn;
  EmbeddingTable::create(params_, l.encoder.embedding.name, l.encoder.embedding.vocab_size, l.encoder.embedding.dim,
                         rng, s);
  LstmParams::create(params_, l.encoder.forward.name, l.encoder.forward.input_dim, l.encoder.forward.hidden, rng, s);
  LstmParams::create(params_, l.encoder.backward.name, l.encoder.backward.input_dim, l.encoder.backward.hidden, rng, s);
  if (!birnn) {
    DenseParams::create(params_, l.decoder_init.name, l.decoder_init.input_dim, l.decoder_init.output_dim, rng, s);
  }
  if (config_.has_slots()) {
    EmbeddingTable::create(params_, l.label_embedding.name, l.label_embedding.vocab_size, l.label_embedding.dim, rng,
                           s);
    if (!birnn) {
      LstmParams::create(params_, l.decoder_lstm.name, l.decoder_lstm.input_dim, l.decoder_lstm.hidden, rng, s);
    }
    if (config_.attention) {
      const auto& a = l.slot_attention;
      AttentionParams::create(params_, a.name, a.query_dim, a.key_dim, a.att_dim, rng, s);
    }
    DenseParams::create(params_, l.slot_out.name, l.slot_out.input_dim, l.slot_out.output_dim, rng, s);
  }
  if (config_.has_intent()) {
    if (config_.attention) {
      const auto& a = l.intent_attention;
      AttentionParams::create(params_, a.name, a.query_dim, a.key_dim, a.att_dim, rng, s);
    }
    if (birnn && config_.attention) init_uniform(params_.add(l.intent_query, {config_.hidden}), rng, s);
    if (!birnn) LstmParams::create(params_, l.intent_lstm.name, l.intent_lstm.input_dim, l.intent_lstm.hidden, rng, s);
    DenseParams::create(params_, l.intent_out.name, l.intent_out.input_dim, l.intent_out.output_dim, rng, s);
  }
}

ModelOutput JointModel::forward(Graph& g, const Batch& batch, const ForwardOptions& options) {
  ParamBinder binder(g, params_);
  return forward_impl(g, binder, batch, options);
}

ModelOutput JointModel::forward(Graph& g, const Batch& batch, const ForwardOptions& options) const {
  ParamBinder binder(g, params_);
  return forward_impl(g, binder, batch, options);
}

ModelOutput JointModel::forward_impl(Graph& g, ParamBinder& binder, const Batch& batch,
                                     const ForwardOptions& options) const {
  if (batch.rows() == 0 || batch.max_len() == 0) throw_error(ErrorKind::kDomain, "forward: empty batch");
  const Layout l = layout_for(config_, dims_);
  Dropout dropout(config_.dropout_keep, options.mode == Mode::kTrain ? options.dropout_rng : nullptr);
  ModelOutput out;
  const TokenBatch& tokens = batch.tokens;

  if (config_.architecture == Architecture::kEncDec) {
    EncoderStates enc = encode(g, binder, l.encoder, tokens, dropout);
    LstmState s0 = initial_decoder_state(g, binder, l.decoder_init, enc);
    if (config_.has_slots()) {
      EncDecStepper stepper(g, binder, config_, l, enc, s0, tokens, dropout);
      run_slot_decoder(stepper, g, batch, dims_, options.mode, out);
    }
    if (config_.has_intent()) {
      Var features;
      if (config_.attention) {
        BoundAttention att = bind(binder, l.intent_attention);
        AttentionMemory memory = make_memory(g, att, enc.states, tokens.lengths);
        AttentionStep a = attend(g, att, s0.h, memory);
        out.intent_attention.push_back(a);
        features = a.context;
      } else {
        features = weighted_sum(g, g.constant(mean_weights(tokens)), enc.states);
      }
      BoundLstm lstm = bind(binder, l.intent_lstm);
      LstmState zero_cell{s0.h, g.constant(Mat::Zero(g.rows(s0.h), g.cols(s0.h)))};
      LstmState step = lstm_step(g, lstm, features, zero_cell);
      Var dropped = dropout.apply(g, step.h, "intent.output");
      out.intent_logits = feed_forward(g, binder, l.intent_out, dropped, Activation::kNone);
    }
  } else {
    Var table = binder(l.encoder.embedding.name);
    std::vector<Var> inputs = embed_steps(g, table, tokens, dropout);
    std::vector<Var> backward = run_backward_lstm(g, bind(binder, l.encoder.backward), inputs, tokens);
    std::vector<Var> states;
    if (config_.has_slots()) {
      BiRnnStepper stepper(g, binder, config_, l, inputs, backward, tokens, dropout);
      run_slot_decoder(stepper, g, batch, dims_, options.mode, out);
      states = stepper.history();
    } else {
      std::vector<Var> forward = run_forward_lstm(g, bind(binder, l.encoder.forward), inputs, tokens);
      for (std::size_t t = 0; t < inputs.size(); ++t) states.push_back(concat(g, {forward[t], backward[t]}));
    }
    if (config_.has_intent()) {
      Var pooled;
      if (config_.attention) {
        BoundAttention att = bind(binder, l.intent_attention);
        AttentionMemory memory = make_memory(g, att, states, tokens.lengths);
        AttentionStep a = attend(g, att, binder(l.intent_query), memory);
        out.intent_attention.push_back(a);
        pooled = a.context;
      } else {
        pooled = weighted_sum(g, g.constant(mean_weights(tokens)), states);
      }
      Var dropped = dropout.apply(g, pooled, "intent.output");
      out.intent_logits = feed_forward(g, binder, l.intent_out, dropped, Activation::kNone);
    }
  }
  out.dropout_sites = dropout.sites();
  return out;
}

Var JointModel::loss(Graph& g, const ModelOutput& output, const Batch& batch) const {
  const std::size_t rows = batch.rows();
  Var total = g.constant(Mat::Zero(1, 1));
  if (config_.has_slots()) {
    if (output.slot_logits.size() != batch.max_len()) {
      throw_error(ErrorKind::kDimension, "loss: " + std::to_string(output.slot_logits.size()) + " slot steps for " +
                                             std::to_string(batch.max_len()) + " positions");
    }
    std::vector<double> weights(rows, config_.slot_weight / static_cast<double>(rows));
    for (std::size_t t = 0; t < batch.max_len(); ++t) {
      total = add(g, total, softmax_cross_entropy(g, output.slot_logits[t], batch.slots[t], weights));
    }
  }
  if (config_.has_intent()) {
    if (batch.intents.size() != rows) throw_error(ErrorKind::kDimension, "loss: intent count does not match batch");
    std::vector<double> weights(rows, config_.intent_weight / static_cast<double>(rows));
    total = add(g, total, softmax_cross_entropy(g, output.intent_logits, batch.intents, weights));
  }
  return total;
}

double JointModel::evaluate_loss(const Batch& batch, Mode mode) const {
  Graph g(false);
  ModelOutput out = forward(g, batch, ForwardOptions{mode, nullptr});
  return g.value(loss(g, out, batch))(0, 0);
}

std::vector<Decoded> JointModel::collect(const Graph& g, const ModelOutput& out, const Batch& batch) const {
  std::vector<Decoded> result(batch.rows());
  std::vector<Mat> log_probs;
  for (Var logits : out.slot_logits) log_probs.push_back(log_softmax_rows(g.value(logits)));
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    Decoded& d = result[r];
    const auto len = static_cast<std::size_t>(batch.tokens.lengths[r]);
    if (config_.has_slots()) {
      for (std::size_t t = 0; t < len; ++t) {
        const int label = out.predicted_slots[t][r];
        d.slots.push_back(label);
        d.slot_log_prob += log_probs[t](static_cast<Eigen::Index>(r), label);
      }
      if (!out.slot_attention.empty()) {
        d.slot_attention = record_row(g, out.slot_attention, r, len);
        d.slot_attention.scores.resize(len);
        d.slot_attention.weights.resize(len);
        d.slot_attention.contexts.resize(len);
      }
    }
    if (config_.has_intent()) {
      auto logits = g.value(out.intent_logits);
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < logits.cols(); ++c) {
        if (logits(static_cast<Eigen::Index>(r), c) > logits(static_cast<Eigen::Index>(r), best)) best = c;
      }
      d.intent = static_cast<int>(best);
      if (!out.intent_attention.empty()) d.intent_attention = record_row(g, out.intent_attention, r, len);
    }
  }
  return result;
}

std::vector<Decoded> JointModel::decode(std::span<const EncodedUtterance> utterances, int beam_width) const {
  if (beam_width < 1) throw_error(ErrorKind::kConfig, "beam width must be at least 1");
  std::vector<Decoded> result;
  result.reserve(utterances.size());
  if (beam_width == 1 || !config_.has_slots()) {
    constexpr std::size_t kChunk = 64;
    for (std::size_t start = 0; start < utterances.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, utterances.size() - start);
      Batch batch = make_batch(utterances.subspan(start, n));
      Graph g(false);
      ModelOutput out = forward(g, batch, ForwardOptions{Mode::kEval, nullptr});
      for (auto& d : collect(g, out, batch)) result.push_back(std::move(d));
    }
    return result;
  }
  for (const auto& u : utterances) result.push_back(decode_beam(u, beam_width));
  return result;
}

Decoded JointModel::decode_beam(const EncodedUtterance& utterance, int beam_width) const {
  const auto width = static_cast<std::size_t>(beam_width);
  const Layout l = layout_for(config_, dims_);
  std::vector<EncodedUtterance> copies(width, EncodedUtterance{utterance.tokens, {}, -1});
  Batch batch = make_batch(copies);

  Graph g(false);
  ParamBinder binder(g, params_);
  Dropout dropout;
  std::unique_ptr<SlotStepper> stepper;
  EncoderStates enc;
  std::vector<Var> inputs, backward;
  if (config_.architecture == Architecture::kEncDec) {
    enc = encode(g, binder, l.encoder, batch.tokens, dropout);
    LstmState s0 = initial_decoder_state(g, binder, l.decoder_init, enc);
    stepper = std::make_unique<EncDecStepper>(g, binder, config_, l, enc, s0, batch.tokens, dropout);
  } else {
    inputs = embed_steps(g, binder(l.encoder.embedding.name), batch.tokens, dropout);
    backward = run_backward_lstm(g, bind(binder, l.encoder.backward), inputs, batch.tokens);
    stepper = std::make_unique<BiRnnStepper>(g, binder, config_, l, inputs, backward, batch.tokens, dropout);
  }
  BeamHypothesis best = beam_search(
      utterance.tokens.size(), width, dims_.bos_label(),
      [&](std::size_t t, std::span<const int> previous) { return log_softmax_rows(g.value(stepper->step(t, previous))); },
      [&](std::span<const int> parents) { stepper->reorder(parents); });

  // Re-run once with the chosen labels fed back to recover attention and the
  // intent prediction conditioned on them.
  EncodedUtterance forced{utterance.tokens, best.labels, -1};
  Batch single = make_batch(std::span<const EncodedUtterance>(&forced, 1));
  Graph replay(false);
  ModelOutput out = forward(replay, single, ForwardOptions{Mode::kTrain, nullptr});
  out.predicted_slots.clear();
  for (int label : best.labels) out.predicted_slots.push_back({label});
  Decoded d = collect(replay, out, single).front();
  d.slot_log_prob = best.log_prob;
  return d;
}

}  // namespace slu
