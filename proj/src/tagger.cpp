// SPDX-License-Identifier: Apache-2.0
#include "slu/tagger.hpp"

#include <set>

#include "slu/error.hpp"

namespace slu {

VocabCoverage vocab_coverage(const Vocabularies& vocab, std::span<const Utterance> corpus, bool slots, bool intents) {
  std::set<std::string> seen_slots, seen_intents;
  for (const auto& u : corpus) {
    if (slots) seen_slots.insert(u.slots.begin(), u.slots.end());
    if (intents) seen_intents.insert(u.intent);
  }
  VocabCoverage c;
  c.distinct_labels = seen_slots.size() + seen_intents.size();
  for (const auto& s : seen_slots) {
    if (vocab.slots.class_of(s) < 0) c.unknown_labels.push_back(s);
  }
  for (const auto& s : seen_intents) {
    if (vocab.intents.class_of(s) < 0) c.unknown_labels.push_back("intent:" + s);
  }
  return c;
}

Tagger::Tagger(JointModel model, Vocabularies vocab) : model_(std::move(model)), vocab_(std::move(vocab)) {
  const ModelDims expected = vocab_.dims();
  const ModelDims& got = model_.dims();
  if (expected.vocab_size != got.vocab_size || expected.slot_classes != got.slot_classes ||
      expected.intent_classes != got.intent_classes) {
    throw_error(ErrorKind::kVocabMismatch, "model dimensions do not match its vocabularies");
  }
}

Tagger Tagger::from_checkpoint(const Checkpoint& ckpt) {
  return Tagger(JointModel(ckpt.model, ckpt.vocab.dims(), ckpt.params), ckpt.vocab);
}

std::vector<Prediction> Tagger::predict(std::span<const std::vector<std::string>> sentences, int beam_width) const {
  std::vector<EncodedUtterance> encoded;
  encoded.reserve(sentences.size());
  for (const auto& s : sentences) {
    if (s.empty()) throw_error(ErrorKind::kDomain, "cannot tag an empty utterance");
    EncodedUtterance e;
    for (const auto& t : s) e.tokens.push_back(vocab_.tokens.id(t));
    e.slots.assign(s.size(), -1);
    encoded.push_back(std::move(e));
  }
  std::vector<Decoded> decoded = model_.decode(encoded, beam_width);
  std::vector<Prediction> out(decoded.size());
  const auto& config = model_.config();
  for (std::size_t i = 0; i < decoded.size(); ++i) {
    Prediction& p = out[i];
    p.tokens = sentences[i];
    if (config.has_slots()) {
      for (int c : decoded[i].slots) p.slots.push_back(vocab_.slots.class_name(c));
    }
    if (config.has_intent()) p.intent = vocab_.intents.class_name(decoded[i].intent);
    p.slot_log_prob = decoded[i].slot_log_prob;
    p.slot_attention = std::move(decoded[i].slot_attention);
    p.intent_attention = std::move(decoded[i].intent_attention);
  }
  return out;
}

std::vector<Prediction> Tagger::predict(std::span<const Utterance> corpus, int beam_width) const {
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(corpus.size());
  for (const auto& u : corpus) sentences.push_back(u.tokens);
  return predict(sentences, beam_width);
}

EvalReport Tagger::evaluate(std::span<const Utterance> corpus, int beam_width) const {
  if (corpus.empty()) throw_error(ErrorKind::kDomain, "cannot evaluate on an empty corpus");
  const auto predictions = predict(corpus, beam_width);
  EvalReport r;
  r.utterances = corpus.size();
  if (model_.config().has_slots()) {
    std::vector<std::vector<std::string>> gold, pred;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      gold.push_back(corpus[i].slots);
      pred.push_back(predictions[i].slots);
    }
    r.slots = slot_f1(gold, pred);
  }
  if (model_.config().has_intent()) {
    std::vector<std::string> gold, pred;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      gold.push_back(corpus[i].intent);
      pred.push_back(*predictions[i].intent);
      r.intent_mistakes += gold.back() != pred.back();
    }
    r.intent_error = intent_error(gold, pred);
  }
  return r;
}

}  // namespace slu
