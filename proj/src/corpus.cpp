// SPDX-License-Identifier: Apache-2.0
#include <filesystem>
#include <fstream>
#include <sstream>

#include "slu/data.hpp"
#include "slu/error.hpp"

namespace slu {

namespace {

bool has_space(const std::string& s) {
  return s.find_first_of(" \t\r\n") != std::string::npos;
}

bool valid_slot_label(const std::string& s) {
  if (s == "O") return true;
  if (s.size() < 3 || s[1] != '-' || (s[0] != 'B' && s[0] != 'I')) return false;
  return !has_space(s);
}

[[noreturn]] void parse_fail(const std::string& source, std::size_t line, const std::string& what) {
  throw_error(ErrorKind::kParse, source + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void validate_utterance(const Utterance& u) {
  if (u.tokens.empty()) throw_error(ErrorKind::kParse, "utterance has no tokens");
  if (u.tokens.size() != u.slots.size()) {
    throw_error(ErrorKind::kParse, "utterance has " + std::to_string(u.tokens.size()) + " tokens but " +
                                       std::to_string(u.slots.size()) + " slot labels");
  }
  if (u.intent.empty() || has_space(u.intent)) throw_error(ErrorKind::kParse, "invalid intent '" + u.intent + "'");
  for (const auto& t : u.tokens) {
    if (t.empty() || has_space(t)) throw_error(ErrorKind::kParse, "invalid token '" + t + "'");
  }
  for (const auto& s : u.slots) {
    if (!valid_slot_label(s)) throw_error(ErrorKind::kParse, "invalid slot label '" + s + "'");
  }
}

std::vector<Utterance> parse_corpus(std::istream& in, const std::string& source) {
  std::vector<Utterance> out;
  std::optional<Utterance> current;
  std::size_t block_start = 0;
  std::string line;
  std::size_t number = 0;

  auto finish = [&]() {
    if (!current) return;
    if (current->tokens.empty()) parse_fail(source, block_start, "block has an intent line but no tokens");
    out.push_back(std::move(*current));
    current.reset();
  };

  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      finish();
      continue;
    }
    if (!current) {
      static const std::string kPrefix = "intent: ";
      if (line.rfind(kPrefix, 0) != 0) parse_fail(source, number, "missing intent line (expected 'intent: <label>')");
      std::string intent = line.substr(kPrefix.size());
      if (intent.empty() || has_space(intent)) parse_fail(source, number, "invalid intent label '" + intent + "'");
      current = Utterance{};
      current->intent = std::move(intent);
      block_start = number;
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      parse_fail(source, number, "expected exactly one token and one slot label separated by a tab");
    }
    std::string token = line.substr(0, tab);
    std::string slot = line.substr(tab + 1);
    if (token.empty() || has_space(token)) parse_fail(source, number, "invalid token '" + token + "'");
    if (!valid_slot_label(slot)) parse_fail(source, number, "invalid slot label '" + slot + "' (expected O, B-X or I-X)");
    current->tokens.push_back(std::move(token));
    current->slots.push_back(std::move(slot));
  }
  finish();
  return out;
}

std::vector<Utterance> parse_corpus_text(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse_corpus(in, source);
}

std::vector<Utterance> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_error(ErrorKind::kIo, "cannot open corpus file '" + path + "'");
  return parse_corpus(in, path);
}

std::string serialize_corpus(std::span<const Utterance> utterances) {
  std::string out;
  for (std::size_t i = 0; i < utterances.size(); ++i) {
    const Utterance& u = utterances[i];
    validate_utterance(u);
    if (i) out += '\n';
    out += "intent: " + u.intent + '\n';
    for (std::size_t t = 0; t < u.tokens.size(); ++t) out += u.tokens[t] + '\t' + u.slots[t] + '\n';
  }
  return out;
}

void save_corpus(const std::string& path, std::span<const Utterance> utterances) {
  const std::string text = serialize_corpus(utterances);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_error(ErrorKind::kIo, "cannot write corpus file '" + path + "'");
  out << text;
  if (!out) throw_error(ErrorKind::kIo, "failed writing corpus file '" + path + "'");
}

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw_error(ErrorKind::kDomain, "k-fold split needs k >= 2");
  if (k > n) {
    throw_error(ErrorKind::kDomain, "k-fold split with k=" + std::to_string(k) + " exceeds corpus size " +
                                        std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<Fold> folds(k);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::size_t at = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    folds[f].test.assign(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(at + size));
    at += size;
  }
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t g = 0; g < k; ++g) {
      if (g != f) folds[f].train.insert(folds[f].train.end(), folds[g].test.begin(), folds[g].test.end());
    }
  }
  return folds;
}

std::vector<Utterance> select(std::span<const Utterance> all, std::span<const std::size_t> indices) {
  std::vector<Utterance> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(all[i]);
  return out;
}

void hold_out_dev(std::vector<Utterance>& train, std::vector<Utterance>& dev, double fraction, std::uint64_t seed) {
  if (train.size() < 2) throw_error(ErrorKind::kDomain, "need at least two training utterances to hold out a dev set");
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  rng.shuffle(order);
  auto n_dev = static_cast<std::size_t>(fraction * static_cast<double>(train.size()));
  n_dev = std::clamp<std::size_t>(n_dev, 1, train.size() - 1);
  std::vector<bool> is_dev(train.size(), false);
  for (std::size_t i = 0; i < n_dev; ++i) is_dev[order[i]] = true;
  std::vector<Utterance> kept;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (is_dev[i]) {
      dev.push_back(std::move(train[i]));
    } else {
      kept.push_back(std::move(train[i]));
    }
  }
  train = std::move(kept);
}

DataSplits load_data_dir(const std::string& dir, double dev_fraction, std::uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  if (!fs::is_directory(root)) throw_error(ErrorKind::kIo, "data directory '" + dir + "' does not exist");
  DataSplits splits;
  const fs::path train = root / "train.txt";
  if (!fs::exists(train)) throw_error(ErrorKind::kIo, "data directory '" + dir + "' has no train.txt");
  splits.train = load_corpus(train.string());
  if (fs::exists(root / "dev.txt")) {
    splits.dev = load_corpus((root / "dev.txt").string());
  } else {
    hold_out_dev(splits.train, splits.dev, dev_fraction, seed);
  }
  if (fs::exists(root / "test.txt")) splits.test = load_corpus((root / "test.txt").string());
  return splits;
}

}  // namespace slu
