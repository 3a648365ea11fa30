// SPDX-License-Identifier: Apache-2.0
#include "slu/eval.hpp"

#include <cstdio>
#include <sstream>

#include "slu/error.hpp"

namespace slu {

std::vector<Chunk> extract_chunks(std::span<const std::string> labels) {
  std::vector<Chunk> chunks;
  std::optional<Chunk> open;
  auto close = [&]() {
    if (open) chunks.push_back(*open);
    open.reset();
  };
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::string& label = labels[i];
    if (label.size() < 2 || label[1] != '-' || (label[0] != 'B' && label[0] != 'I')) {
      close();
      continue;
    }
    const std::string type = label.substr(2);
    if (label[0] == 'I' && open && open->type == type) {
      open->end = i;
      continue;
    }
    close();
    open = Chunk{type, i, i};
  }
  close();
  return chunks;
}

double ChunkCounts::precision() const {
  return predicted ? 100.0 * static_cast<double>(correct) / static_cast<double>(predicted) : 0.0;
}

double ChunkCounts::recall() const {
  return gold ? 100.0 * static_cast<double>(correct) / static_cast<double>(gold) : 0.0;
}

double ChunkCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

SlotScores slot_f1(std::span<const std::vector<std::string>> gold, std::span<const std::vector<std::string>> predicted) {
  if (gold.size() != predicted.size()) {
    throw_error(ErrorKind::kDimension, "slot_f1: " + std::to_string(gold.size()) + " gold utterances vs " +
                                           std::to_string(predicted.size()) + " predicted");
  }
  SlotScores s;
  for (std::size_t u = 0; u < gold.size(); ++u) {
    if (gold[u].size() != predicted[u].size()) {
      throw_error(ErrorKind::kDimension, "slot_f1: utterance " + std::to_string(u) + " has " +
                                             std::to_string(gold[u].size()) + " gold labels vs " +
                                             std::to_string(predicted[u].size()) + " predicted");
    }
    const auto g = extract_chunks(gold[u]);
    const auto p = extract_chunks(predicted[u]);
    for (const auto& c : g) {
      ++s.total.gold;
      ++s.per_label[c.type].gold;
    }
    for (const auto& c : p) {
      ++s.total.predicted;
      ++s.per_label[c.type].predicted;
    }
    // Both lists are sorted by start and non-overlapping, so a merge finds the
    // exact matches.
    std::size_t i = 0, j = 0;
    while (i < g.size() && j < p.size()) {
      if (g[i].start < p[j].start) {
        ++i;
      } else if (p[j].start < g[i].start) {
        ++j;
      } else {
        if (g[i] == p[j]) {
          ++s.total.correct;
          ++s.per_label[g[i].type].correct;
        }
        ++i;
        ++j;
      }
    }
  }
  return s;
}

double intent_error(std::span<const std::string> gold, std::span<const std::string> predicted) {
  if (gold.size() != predicted.size()) {
    throw_error(ErrorKind::kDimension, "intent_error: " + std::to_string(gold.size()) + " gold intents vs " +
                                           std::to_string(predicted.size()) + " predicted");
  }
  if (gold.empty()) throw_error(ErrorKind::kDomain, "intent_error of an empty corpus");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) wrong += gold[i] != predicted[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(gold.size());
}

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string quote_csv(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string format_table(const EvalReport& r) {
  std::ostringstream out;
  out << "utterances: " << r.utterances << '\n';
  if (r.slots) {
    const auto& t = r.slots->total;
    char line[256];
    out << "slot filling (chunk level)\n";
    std::snprintf(line, sizeof line, "  %-36s %9s %9s %9s %7s %7s %7s\n", "label", "precision", "recall", "f1", "gold",
                  "pred", "correct");
    out << line;
    for (const auto& [label, c] : r.slots->per_label) {
      std::snprintf(line, sizeof line, "  %-36s %9.2f %9.2f %9.2f %7zu %7zu %7zu\n", label.c_str(), c.precision(),
                    c.recall(), c.f1(), c.gold, c.predicted, c.correct);
      out << line;
    }
    std::snprintf(line, sizeof line, "  %-36s %9.2f %9.2f %9.2f %7zu %7zu %7zu\n", "overall", t.precision(),
                  t.recall(), t.f1(), t.gold, t.predicted, t.correct);
    out << line;
  } else {
    out << "slot filling: n/a\n";
  }
  if (r.intent_error) {
    out << "intent error: " << fixed(*r.intent_error, 2) << "% (" << r.intent_mistakes << " of " << r.utterances
        << ")\n";
  } else {
    out << "intent error: n/a\n";
  }
  return out.str();
}

std::string format_key_values(const EvalReport& r) {
  std::ostringstream out;
  out << "utterances=" << r.utterances << '\n';
  if (r.slots) {
    const auto& t = r.slots->total;
    out << "slot_precision=" << fixed(t.precision()) << '\n';
    out << "slot_recall=" << fixed(t.recall()) << '\n';
    out << "slot_f1=" << fixed(t.f1()) << '\n';
    out << "gold_chunks=" << t.gold << '\n';
    out << "predicted_chunks=" << t.predicted << '\n';
    out << "correct_chunks=" << t.correct << '\n';
    for (const auto& [label, c] : r.slots->per_label) {
      out << "label." << label << ".precision=" << fixed(c.precision()) << '\n';
      out << "label." << label << ".recall=" << fixed(c.recall()) << '\n';
      out << "label." << label << ".f1=" << fixed(c.f1()) << '\n';
      out << "label." << label << ".gold=" << c.gold << '\n';
      out << "label." << label << ".predicted=" << c.predicted << '\n';
      out << "label." << label << ".correct=" << c.correct << '\n';
    }
  } else {
    out << "slot_precision=n/a\nslot_recall=n/a\nslot_f1=n/a\n";
  }
  if (r.intent_error) {
    out << "intent_error=" << fixed(*r.intent_error) << '\n';
    out << "intent_mistakes=" << r.intent_mistakes << '\n';
  } else {
    out << "intent_error=n/a\n";
  }
  return out.str();
}

std::string attention_csv(std::span<const std::string> tokens, std::span<const std::string> row_labels,
                          const std::vector<std::vector<double>>& weights) {
  if (row_labels.size() != weights.size()) {
    throw_error(ErrorKind::kDimension, "attention_csv: " + std::to_string(row_labels.size()) + " row labels for " +
                                           std::to_string(weights.size()) + " rows");
  }
  std::string out = "label";
  for (const auto& t : tokens) out += "," + quote_csv(t);
  out += "\r\n";
  for (std::size_t r = 0; r < weights.size(); ++r) {
    if (weights[r].size() != tokens.size()) {
      throw_error(ErrorKind::kDimension, "attention_csv: row " + std::to_string(r) + " has " +
                                             std::to_string(weights[r].size()) + " weights for " +
                                             std::to_string(tokens.size()) + " tokens");
    }
    out += quote_csv(row_labels[r]);
    for (double w : weights[r]) {
      char buf[40];
      std::snprintf(buf, sizeof buf, ",%.17g", w);
      out += buf;
    }
    out += "\r\n";
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw_error(ErrorKind::kParse, "unterminated quoted CSV field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace slu
