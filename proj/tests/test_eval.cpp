// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>

#include "chunk_oracle.hpp"
#include "slu/error.hpp"
#include "slu/eval.hpp"
#include "slu/tensor.hpp"

namespace slu {
namespace {

using testing::Labels;
using testing::random_labels;

TEST(Chunks, Examples) {
  EXPECT_EQ(extract_chunks(Labels{"B-a", "I-a", "O"}), (std::vector<Chunk>{{"a", 0, 1}}));
  EXPECT_EQ(extract_chunks(Labels{"I-a", "I-a"}), (std::vector<Chunk>{{"a", 0, 1}}));
  EXPECT_EQ(extract_chunks(Labels{"B-a", "B-a", "I-b"}), (std::vector<Chunk>{{"a", 0, 0}, {"a", 1, 1}, {"b", 2, 2}}));
  EXPECT_EQ(extract_chunks(Labels{"O", "I-a", "I-b", "O"}), (std::vector<Chunk>{{"a", 1, 1}, {"b", 2, 2}}));
  EXPECT_TRUE(extract_chunks(Labels{"O", "O"}).empty());
}

TEST(SlotF1, WorkedExamples) {
  std::vector<Labels> gold{{"B-a", "I-a", "O"}};
  EXPECT_DOUBLE_EQ(slot_f1(gold, gold).total.f1(), 100.0);
  auto s = slot_f1(gold, std::vector<Labels>{{"B-a", "O", "O"}});
  EXPECT_EQ(s.total.correct, 0u);
  EXPECT_EQ(s.total.precision(), 0.0);
  EXPECT_EQ(s.total.recall(), 0.0);
  EXPECT_EQ(s.total.f1(), 0.0);

  auto half = slot_f1(std::vector<Labels>{{"B-a", "O", "B-b"}}, std::vector<Labels>{{"B-a", "O", "O"}});
  EXPECT_EQ(half.total.gold, 2u);
  EXPECT_EQ(half.total.predicted, 1u);
  EXPECT_DOUBLE_EQ(half.total.precision(), 100.0);
  EXPECT_DOUBLE_EQ(half.total.recall(), 50.0);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", half.total.f1());
  EXPECT_STREQ(buf, "66.67");
  EXPECT_EQ(half.per_label.at("b").correct, 0u);
  EXPECT_EQ(half.per_label.at("a").correct, 1u);
}

TEST(SlotF1, MatchesBruteForceOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<Labels> gold, pred;
    const std::size_t sentences = 1 + rng.below(3);
    for (std::size_t k = 0; k < sentences; ++k) {
      const std::size_t n = 1 + rng.below(8);
      gold.push_back(random_labels(rng, n));
      pred.push_back(random_labels(rng, n));
    }
    const auto oracle = testing::oracle_counts(gold, pred);
    const auto s = slot_f1(gold, pred);
    ASSERT_EQ(s.total.gold, oracle.gold) << trial;
    ASSERT_EQ(s.total.predicted, oracle.predicted) << trial;
    ASSERT_EQ(s.total.correct, oracle.correct) << trial;
    ASSERT_EQ(s.total.f1(), oracle.f1()) << trial;
  }
}

TEST(SlotF1, SymmetricUnderReordering) {
  Rng rng(7);
  std::vector<Labels> gold, pred;
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 1 + rng.below(10);
    gold.push_back(random_labels(rng, n));
    pred.push_back(random_labels(rng, n));
  }
  const auto before = slot_f1(gold, pred);
  std::vector<std::size_t> order(50);
  for (std::size_t i = 0; i < 50; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<Labels> g2, p2;
  for (auto i : order) {
    g2.push_back(gold[i]);
    p2.push_back(pred[i]);
  }
  const auto after = slot_f1(g2, p2);
  EXPECT_EQ(before.total.correct, after.total.correct);
  EXPECT_EQ(before.total.f1(), after.total.f1());
}

TEST(SlotF1, LengthMismatchIsADimensionError) {
  try {
    slot_f1(std::vector<Labels>{{"O", "O"}}, std::vector<Labels>{{"O"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
  }
  EXPECT_THROW(slot_f1(std::vector<Labels>{{"O"}}, std::vector<Labels>{}), Error);
}

TEST(IntentError, Examples) {
  const std::vector<std::string> gold{"a", "b", "c", "d"};
  EXPECT_EQ(intent_error(gold, gold), 0.0);
  EXPECT_DOUBLE_EQ(intent_error(gold, std::vector<std::string>{"a", "b", "c", "x"}), 25.0);

  std::vector<std::string> g(893, "flight"), p(893, "flight");
  for (int i = 0; i < 18; ++i) p[static_cast<std::size_t>(i) * 40] = "airfare";
  const double e = intent_error(g, p);
  EXPECT_NEAR(e, 2.016, 5e-4);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", e);
  EXPECT_STREQ(buf, "2.02");

  EXPECT_THROW(intent_error(gold, std::vector<std::string>{"a"}), Error);
  try {
    intent_error(std::vector<std::string>{}, std::vector<std::string>{});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::kDomain);
  }
}

TEST(Report, KeyValuesAndTable) {
  EvalReport r;
  r.utterances = 2;
  r.slots = slot_f1(std::vector<Labels>{{"B-a", "O", "B-b"}}, std::vector<Labels>{{"B-a", "O", "O"}});
  const std::string kv = format_key_values(r);
  EXPECT_NE(kv.find("slot_f1=66.6667\n"), std::string::npos) << kv;
  EXPECT_NE(kv.find("label.b.recall=0.0000\n"), std::string::npos) << kv;
  EXPECT_NE(kv.find("intent_error=n/a\n"), std::string::npos) << kv;
  r.intent_error = 50.0;
  r.intent_mistakes = 1;
  r.slots.reset();
  const std::string kv2 = format_key_values(r);
  EXPECT_NE(kv2.find("slot_f1=n/a\n"), std::string::npos) << kv2;
  EXPECT_NE(kv2.find("intent_error=50.0000\n"), std::string::npos) << kv2;
  EXPECT_FALSE(format_table(r).empty());
}

TEST(AttentionCsv, RoundTripRowsSumToOne) {
  const std::vector<std::string> tokens{"from", "new,york", "say \"hi\""};
  const std::vector<std::string> rows{"O", "B-x", "I-x"};
  std::vector<std::vector<double>> w{{0.2, 0.3, 0.5}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.1, 0.1, 0.8}};
  const std::string csv = attention_csv(tokens, rows, w);
  auto parsed = parse_csv(csv);
  ASSERT_EQ(parsed.size(), 4u);
  EXPECT_EQ(parsed[0], (std::vector<std::string>{"label", "from", "new,york", "say \"hi\""}));
  for (std::size_t r = 1; r < 4; ++r) {
    EXPECT_EQ(parsed[r][0], rows[r - 1]);
    double total = 0.0;
    for (std::size_t j = 1; j < parsed[r].size(); ++j) {
      const double v = std::stod(parsed[r][j]);
      EXPECT_EQ(v, w[r - 1][j - 1]);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-6);
  }
}

TEST(AttentionCsv, SingleToken) {
  auto parsed = parse_csv(attention_csv(std::vector<std::string>{"hi"}, std::vector<std::string>{"O"}, {{1.0}}));
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[1], (std::vector<std::string>{"O", "1"}));
}

}  // namespace
}  // namespace slu
