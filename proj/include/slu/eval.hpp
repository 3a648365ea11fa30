// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slu {

/// Typed token span [start, end], both inclusive.
struct Chunk {
  std::string type;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const Chunk&) const = default;
};

/// conlleval chunking: a chunk starts at B-X, or at I-X unless the previous
/// label is B-X or I-X of the same type; it ends before O, any B-, or a type
/// change.
std::vector<Chunk> extract_chunks(std::span<const std::string> labels);

struct ChunkCounts {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  /// Percentages; 0 when the denominator is 0.
  double precision() const;
  double recall() const;
  double f1() const;
};

struct SlotScores {
  ChunkCounts total;
  std::map<std::string, ChunkCounts> per_label;
};

/// Micro-averaged chunk F1. Throws kDimension on length mismatches.
SlotScores slot_f1(std::span<const std::vector<std::string>> gold, std::span<const std::vector<std::string>> predicted);

/// 100 * mismatches / size. Throws kDimension on length mismatch, kDomain
/// when empty.
double intent_error(std::span<const std::string> gold, std::span<const std::string> predicted);

struct EvalReport {
  std::size_t utterances = 0;
  std::optional<SlotScores> slots;
  std::optional<double> intent_error;
  std::size_t intent_mistakes = 0;
};

/// Human-readable table.
std::string format_table(const EvalReport& report);
/// One `key=value` per line; absent heads print `n/a`.
std::string format_key_values(const EvalReport& report);

/// CSV with a header row `label,<token>...` and one row per decoding step
/// starting with that step's label. Fields are quoted when needed.
std::string attention_csv(std::span<const std::string> tokens, std::span<const std::string> row_labels,
                          const std::vector<std::vector<double>>& weights);

/// Parses one CSV record list; used to read attention dumps back.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

}  // namespace slu
