// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "slu/model.hpp"

namespace slu {

struct Utterance {
  std::vector<std::string> tokens;
  std::vector<std::string> slots;
  std::string intent;

  bool operator==(const Utterance&) const = default;
};

/// Throws kParse unless tokens and slots have the same non-zero length,
/// every slot is "O", "B-X" or "I-X", and the intent is a non-empty word.
void validate_utterance(const Utterance& u);

/// Reads the block format:
///
///   intent: <label>
///   <token>\t<slot>
///   ...
///   <blank line>
///
/// Errors carry `source` and the 1-based line number.
std::vector<Utterance> parse_corpus(std::istream& in, const std::string& source = "<stream>");
std::vector<Utterance> parse_corpus_text(const std::string& text, const std::string& source = "<string>");
std::vector<Utterance> load_corpus(const std::string& path);

std::string serialize_corpus(std::span<const Utterance> utterances);
void save_corpus(const std::string& path, std::span<const Utterance> utterances);

/// Bijective string <-> id map whose first ids are reserved specials.
class Vocabulary {
 public:
  static constexpr const char* kPad = "<pad>";
  static constexpr const char* kUnk = "<unk>";
  static constexpr const char* kBos = "<bos>";

  Vocabulary() = default;
  /// `entries` in id order; the first `reserved` are the specials.
  Vocabulary(std::vector<std::string> entries, std::size_t reserved);

  std::size_t size() const { return entries_.size(); }
  std::size_t reserved() const { return reserved_; }
  /// Number of non-special entries.
  std::size_t classes() const { return entries_.size() - reserved_; }
  bool contains(const std::string& s) const { return ids_.count(s) != 0; }
  /// Id of `s`, or the UNK id when unseen.
  int id(const std::string& s) const;
  const std::string& entry(int id) const;
  const std::vector<std::string>& entries() const { return entries_; }

  /// Class index (id minus reserved) of `s`, or -1 when unseen.
  int class_of(const std::string& s) const;
  const std::string& class_name(int cls) const { return entry(cls + static_cast<int>(reserved_)); }

  bool operator==(const Vocabulary& other) const { return entries_ == other.entries_ && reserved_ == other.reserved_; }

 private:
  std::vector<std::string> entries_;
  std::size_t reserved_ = 0;
  std::unordered_map<std::string, int> ids_;
};

struct Vocabularies {
  /// Specials: <pad>=0, <unk>=1.
  Vocabulary tokens;
  /// Specials: <pad>=0, <unk>=1, <bos>=2.
  Vocabulary slots;
  /// Specials: <pad>=0, <unk>=1.
  Vocabulary intents;

  ModelDims dims() const { return {tokens.size(), slots.classes(), intents.classes()}; }
  bool operator==(const Vocabularies&) const = default;
};

/// Specials first, then entries by descending frequency, ties broken
/// lexicographically. Tokens seen fewer than `min_count` times map to UNK.
Vocabularies build_vocab(std::span<const Utterance> utterances, std::size_t min_count = 1);

EncodedUtterance encode_utterance(const Utterance& u, const Vocabularies& v);
std::vector<EncodedUtterance> encode_corpus(std::span<const Utterance> utterances, const Vocabularies& v);

/// Template grammar for synthetic corpora.
///
/// File format (one directive per line, `#` comments):
///
///   lexicon <name> = value one | value two | ...
///   template <intent> = words {slot.type:lexicon} more words {other.slot}
///
/// `{slot}` without `:lexicon` reads the lexicon named like the slot. Every
/// word of a filler gets B-/I- labels of the placeholder's slot type; all
/// other words are labelled O.
struct SyntheticGrammar {
  struct Piece {
    std::string word;       // literal word when slot is empty
    std::string slot;       // slot type of a placeholder
    std::string lexicon;    // lexicon the placeholder draws from
  };
  struct Template {
    std::string intent;
    std::vector<Piece> pieces;
  };

  std::map<std::string, std::vector<std::vector<std::string>>> lexicons;
  std::vector<Template> templates;

  std::vector<std::string> intents() const;
  std::vector<std::string> slot_types() const;
};

SyntheticGrammar parse_grammar(std::istream& in, const std::string& source = "<grammar>");
SyntheticGrammar parse_grammar_text(const std::string& text, const std::string& source = "<grammar>");
SyntheticGrammar load_grammar(const std::string& path);
/// Built-in airline-domain grammar.
const SyntheticGrammar& default_grammar();
const std::string& default_grammar_text();

/// Draws a template uniformly, then each filler uniformly from its lexicon.
std::vector<Utterance> generate_synthetic(const SyntheticGrammar& grammar, std::size_t n, std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle, then k contiguous folds whose sizes differ by at most one
/// (the first n % k folds are the larger ones). Throws kDomain when k < 2 or
/// k > n.
std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

std::vector<Utterance> select(std::span<const Utterance> all, std::span<const std::size_t> indices);

struct DataSplits {
  std::vector<Utterance> train;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;
};

/// Loads `train.txt`, and `dev.txt` / `test.txt` when present. Without a
/// dev file, a seeded `dev_fraction` of train is held out.
DataSplits load_data_dir(const std::string& dir, double dev_fraction, std::uint64_t seed);
/// Holds out a seeded fraction (at least one utterance) of `train` as dev.
void hold_out_dev(std::vector<Utterance>& train, std::vector<Utterance>& dev, double fraction, std::uint64_t seed);

}  // namespace slu
