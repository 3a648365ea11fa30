// SPDX-License-Identifier: Apache-2.0
#include <algorithm>

#include "slu/data.hpp"
#include "slu/error.hpp"

namespace slu {

Vocabulary::Vocabulary(std::vector<std::string> entries, std::size_t reserved)
    : entries_(std::move(entries)), reserved_(reserved) {
  if (reserved_ < 2 || reserved_ > entries_.size()) throw_error(ErrorKind::kConfig, "vocabulary lacks its specials");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!ids_.emplace(entries_[i], static_cast<int>(i)).second) {
      throw_error(ErrorKind::kConfig, "duplicate vocabulary entry '" + entries_[i] + "'");
    }
  }
}

int Vocabulary::id(const std::string& s) const {
  auto it = ids_.find(s);
  return it == ids_.end() ? 1 : it->second;
}

const std::string& Vocabulary::entry(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
    throw_error(ErrorKind::kDomain, "vocabulary id " + std::to_string(id) + " out of range");
  }
  return entries_[static_cast<std::size_t>(id)];
}

int Vocabulary::class_of(const std::string& s) const {
  auto it = ids_.find(s);
  if (it == ids_.end() || static_cast<std::size_t>(it->second) < reserved_) return -1;
  return it->second - static_cast<int>(reserved_);
}

namespace {

std::vector<std::string> ranked(const std::map<std::string, std::size_t>& counts, std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> out;
  for (auto& [word, count] : items) {
    if (count >= min_count) out.push_back(word);
  }
  return out;
}

Vocabulary with_specials(std::vector<std::string> specials, const std::vector<std::string>& rest) {
  const std::size_t reserved = specials.size();
  specials.insert(specials.end(), rest.begin(), rest.end());
  return Vocabulary(std::move(specials), reserved);
}

}  // namespace

Vocabularies build_vocab(std::span<const Utterance> utterances, std::size_t min_count) {
  if (utterances.empty()) throw_error(ErrorKind::kDomain, "cannot build a vocabulary from an empty corpus");
  std::map<std::string, std::size_t> tokens, slots, intents;
  for (const auto& u : utterances) {
    for (const auto& t : u.tokens) ++tokens[t];
    for (const auto& s : u.slots) ++slots[s];
    ++intents[u.intent];
  }
  Vocabularies v;
  v.tokens = with_specials({Vocabulary::kPad, Vocabulary::kUnk}, ranked(tokens, std::max<std::size_t>(min_count, 1)));
  v.slots = with_specials({Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kBos}, ranked(slots, 1));
  v.intents = with_specials({Vocabulary::kPad, Vocabulary::kUnk}, ranked(intents, 1));
  return v;
}

EncodedUtterance encode_utterance(const Utterance& u, const Vocabularies& v) {
  EncodedUtterance e;
  e.tokens.reserve(u.tokens.size());
  for (const auto& t : u.tokens) e.tokens.push_back(v.tokens.id(t));
  e.slots.reserve(u.slots.size());
  for (const auto& s : u.slots) e.slots.push_back(v.slots.class_of(s));
  e.intent = v.intents.class_of(u.intent);
  return e;
}

std::vector<EncodedUtterance> encode_corpus(std::span<const Utterance> utterances, const Vocabularies& v) {
  std::vector<EncodedUtterance> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(encode_utterance(u, v));
  return out;
}

}  // namespace slu
