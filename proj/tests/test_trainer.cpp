// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <functional>
#include <optional>

#include "slu/checkpoint.hpp"
#include "slu/config.hpp"
#include "slu/error.hpp"
#include "slu/optim.hpp"
#include "slu/tagger.hpp"
#include "slu/trainer.hpp"
#include "test_util.hpp"

namespace slu {
namespace {

using testing::make_utterance;
using testing::tiny_config;

std::optional<ErrorKind> error_of(const std::function<void()>& f, std::string* message = nullptr) {
  try {
    f();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  return std::nullopt;
}

ParamStore two_params(std::vector<double> a_grad, std::vector<double> b_grad) {
  ParamStore s;
  Tensor& a = s.add("a", {a_grad.size()});
  Tensor& b = s.add("b", {b_grad.size()});
  std::copy(a_grad.begin(), a_grad.end(), a.grad().begin());
  std::copy(b_grad.begin(), b_grad.end(), b.grad().begin());
  return s;
}

TEST(Clip, ScalesDownLargeGradients) {
  ParamStore s = two_params({6.0}, {8.0});
  EXPECT_DOUBLE_EQ(global_grad_norm(s), 10.0);
  EXPECT_DOUBLE_EQ(clip_gradients(s, 5.0), 0.5);
  EXPECT_DOUBLE_EQ(s.at("a").grad()[0], 3.0);
  EXPECT_DOUBLE_EQ(s.at("b").grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(global_grad_norm(s), 5.0);
}

TEST(Clip, LeavesSmallGradientsAlone) {
  ParamStore s = two_params({1.0, 2.0}, {2.0});
  EXPECT_DOUBLE_EQ(global_grad_norm(s), 3.0);
  EXPECT_EQ(clip_gradients(s, 5.0), 1.0);
  EXPECT_EQ(s.at("a").grad()[1], 2.0);
}

TEST(Clip, NonFiniteGradientNamesTheParameter) {
  ParamStore s = two_params({1.0}, {std::nan("")});
  std::string msg;
  EXPECT_EQ(error_of([&] { clip_gradients(s, 5.0); }, &msg), ErrorKind::kNumeric);
  EXPECT_NE(msg.find("'b'"), std::string::npos) << msg;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore s = two_params({0.3, -20.0}, {1e-3});
  AdamState st = AdamState::for_params(s);
  AdamConfig c;
  adam_step(s, st, c);
  EXPECT_NEAR(s.at("a")[0], -c.lr, 1e-10);
  EXPECT_NEAR(s.at("a")[1], c.lr, 1e-10);
  EXPECT_NEAR(s.at("b")[0], -c.lr, 1e-8);
  EXPECT_EQ(st.t, 1u);
  EXPECT_EQ(s.at("a").grad()[0], 0.0);
}

TEST(Adam, ZeroGradientStillAdvancesTime) {
  ParamStore s = two_params({0.0}, {0.0});
  s.at("a")[0] = 0.7;
  AdamState st = AdamState::for_params(s);
  adam_step(s, st, AdamConfig{});
  EXPECT_EQ(st.t, 1u);
  EXPECT_EQ(s.at("a")[0], 0.7);
}

TEST(Adam, MatchesHandWrittenUpdate) {
  ParamStore s = two_params({0.0}, {0.0});
  s.at("a")[0] = 1.0;
  AdamState st = AdamState::for_params(s);
  AdamConfig c{0.01, 0.8, 0.95, 1e-6};
  double theta = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 20; ++t) {
    const double g = 2.0 * theta + std::sin(t);
    s.at("a").grad()[0] = g;
    adam_step(s, st, c);
    m = 0.8 * m + 0.2 * g;
    v = 0.95 * v + 0.05 * g * g;
    const double mh = m / (1.0 - std::pow(0.8, t));
    const double vh = v / (1.0 - std::pow(0.95, t));
    theta -= 0.01 * mh / (std::sqrt(vh) + 1e-6);
    EXPECT_NEAR(s.at("a")[0], theta, 1e-14);
  }
}

TEST(Adam, MinimizesQuadratic) {
  ParamStore s;
  s.add("x", {1})[0] = 3.0;
  AdamState st = AdamState::for_params(s);
  AdamConfig c;
  c.lr = 0.1;
  for (int i = 0; i < 100; ++i) {
    s.at("x").grad()[0] = 2.0 * s.at("x")[0];
    adam_step(s, st, c);
  }
  EXPECT_LT(std::abs(s.at("x")[0]), 0.5);
}

Checkpoint small_checkpoint(std::uint64_t seed) {
  std::vector<Utterance> corpus = generate_synthetic(default_grammar(), 20, seed);
  Checkpoint c;
  c.model = tiny_config(Architecture::kBiRnn, true, true, Task::kJoint);
  c.vocab = build_vocab(corpus);
  Rng rng(seed);
  JointModel model(c.model, c.vocab.dims(), rng);
  c.params = model.params();
  c.adam = AdamState::for_params(c.params);
  for (auto& [name, t] : c.adam.m) {
    for (double& x : t.data()) x = rng.uniform(-1.0, 1.0) * 1e-3;
  }
  c.adam.t = c.step = 17;
  return c;
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Checkpoint c = small_checkpoint(1);
  const std::string bytes = serialize_checkpoint(c);
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_EQ(back.step, 17u);
  EXPECT_EQ(back.vocab, c.vocab);
  EXPECT_EQ(model_config_text(back.model), model_config_text(c.model));
  for (const auto& [name, t] : c.params) {
    auto a = t.data();
    auto b = back.params.at(name).data();
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i])) << name;
    }
  }
  EXPECT_EQ(back.adam.m.at("embedding").data()[3], c.adam.m.at("embedding").data()[3]);
}

TEST(Checkpoint, F32StoresRoundedValues) {
  const Checkpoint c = small_checkpoint(2);
  const std::string bytes = serialize_checkpoint(c, Precision::kF32);
  EXPECT_LT(bytes.size(), serialize_checkpoint(c).size());
  const Checkpoint back = parse_checkpoint(bytes);
  for (const auto& [name, t] : c.params) {
    auto a = t.data();
    auto b = back.params.at(name).data();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(b[i], static_cast<double>(static_cast<float>(a[i])));
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string bytes = serialize_checkpoint(small_checkpoint(3));
  std::string msg;
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(error_of([&] { parse_checkpoint(bad, "m.ckpt"); }, &msg), ErrorKind::kParse);
  EXPECT_NE(msg.find("m.ckpt"), std::string::npos) << msg;
  bad = bytes;
  bad[4] = 2;
  EXPECT_EQ(error_of([&] { parse_checkpoint(bad); }), ErrorKind::kUnsupported);
  EXPECT_EQ(error_of([&] { parse_checkpoint(bytes.substr(0, bytes.size() / 2)); }), ErrorKind::kParse);
  EXPECT_EQ(error_of([&] { parse_checkpoint(bytes + "x"); }), ErrorKind::kParse);
  EXPECT_EQ(error_of([&] { parse_checkpoint(""); }), ErrorKind::kParse);
  EXPECT_EQ(error_of([&] { load_checkpoint("/nonexistent/x.ckpt"); }), ErrorKind::kIo);
}

TEST(Config, DumpRoundTrips) {
  RunConfig c;
  set_option(c, "arch", "encdec");
  set_option(c, "aligned", "false");
  set_option(c, "lr", "0.0025");
  set_option(c, "n-train", "123");
  set_option(c, "precision", "f32");
  const std::string dump = dump_config(c);
  RunConfig back;
  apply_config_text(back, dump);
  EXPECT_EQ(dump_config(back), dump);
  EXPECT_EQ(back.n_train, 123u);
  EXPECT_EQ(back.train.adam.lr, 0.0025);
  EXPECT_EQ(back.model.architecture, Architecture::kEncDec);
  EXPECT_EQ(get_option(back, "aligned"), "false");
}

TEST(Config, Errors) {
  RunConfig c;
  std::string msg;
  EXPECT_EQ(error_of([&] { set_option(c, "learning_rate", "1"); }, &msg), ErrorKind::kConfig);
  EXPECT_NE(msg.find("learning_rate"), std::string::npos);
  EXPECT_EQ(error_of([&] { set_option(c, "hidden", "-3"); }), ErrorKind::kConfig);
  EXPECT_EQ(error_of([&] { set_option(c, "aligned", "maybe"); }), ErrorKind::kConfig);
  EXPECT_EQ(error_of([&] { set_option(c, "dropout_keep", "0.5x"); }), ErrorKind::kConfig);
  EXPECT_EQ(error_of([&] { apply_config_text(c, "# fine\nhidden = 4\nbogus\n", "c.cfg"); }, &msg),
            ErrorKind::kConfig);
  EXPECT_NE(msg.find("c.cfg:3"), std::string::npos) << msg;
  EXPECT_EQ(c.model.hidden, 4u);
  EXPECT_EQ(error_of([&] { parse_model_config_text("hidden = 4\nepochs = 3\n"); }), ErrorKind::kConfig);
}

TEST(Config, ModelTextKeepsOnlyModelKeys) {
  ModelConfig m = tiny_config(Architecture::kEncDec, true, false, Task::kSlot);
  m.beam_width = 4;
  const std::string text = model_config_text(m);
  EXPECT_EQ(text.find("epochs"), std::string::npos);
  EXPECT_EQ(model_config_text(parse_model_config_text(text)), text);
}

std::vector<Utterance> toy_corpus(std::size_t n, std::uint64_t seed) {
  return generate_synthetic(default_grammar(), n, seed);
}

ModelConfig small_model() {
  ModelConfig m;
  m.hidden = 8;
  m.embedding_dim = 8;
  m.label_embedding_dim = 4;
  m.att_dim = 8;
  m.init_scale = 0.1;
  return m;
}

TEST(Train, SameSeedSameEverything) {
  auto train_set = toy_corpus(40, 1);
  auto dev = toy_corpus(10, 2);
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  std::vector<std::string> lines;
  auto a = train(small_model(), c, train_set, dev, [&](const EpochMetrics& m) { lines.push_back(format_metrics(m)); });
  auto b = train(small_model(), c, train_set, dev);
  ASSERT_EQ(a.log.size(), 3u);
  ASSERT_EQ(lines.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(format_metrics(a.log[i]), format_metrics(b.log[i]));
  EXPECT_EQ(serialize_checkpoint(a.best), serialize_checkpoint(b.best));
  c.seed = 2;
  auto d = train(small_model(), c, train_set, dev);
  EXPECT_NE(serialize_checkpoint(a.best), serialize_checkpoint(d.best));
}

TEST(Train, LossFallsOnToyCorpus) {
  auto corpus = toy_corpus(16, 5);
  TrainConfig c;
  c.epochs = 60;
  c.patience = 60;
  c.batch_size = 4;
  c.adam.lr = 0.01;
  ModelConfig m = small_model();
  m.dropout_keep = 1.0;
  auto r = train(m, c, corpus, corpus);
  EXPECT_LT(r.log.back().train_loss, 0.5 * r.log.front().train_loss);
  ASSERT_TRUE(r.log.back().dev_f1.has_value());
  EXPECT_GT(*r.log.back().dev_f1, 50.0);
}

TEST(Train, BestSnapshotAndEarlyStop) {
  auto corpus = toy_corpus(16, 6);
  TrainConfig c;
  c.epochs = 12;
  c.eval_every = 5;
  c.patience = 1;
  auto r = train(small_model(), c, corpus, corpus);
  // Evaluations at epochs 5, 10 and 12 (the last), unless stopped early.
  ASSERT_GE(r.log.size(), 2u);
  EXPECT_EQ(r.log[0].epoch, 5u);
  EXPECT_EQ(r.log[1].epoch, 10u);
  EXPECT_LE(r.epochs_run, 12u);
  bool found = false;
  for (const auto& m : r.log) found = found || m.epoch == r.best_epoch;
  EXPECT_TRUE(found);
  EXPECT_GT(r.best.step, 0u);
  EXPECT_EQ(r.best.step, r.best.adam.t);
}

TEST(Train, IntentOnlyReportsNoF1) {
  auto corpus = toy_corpus(16, 7);
  TrainConfig c;
  c.epochs = 2;
  ModelConfig m = small_model();
  m.task = Task::kIntent;
  auto r = train(m, c, corpus, corpus);
  EXPECT_FALSE(r.log.back().dev_f1.has_value());
  EXPECT_TRUE(r.log.back().dev_intent_error.has_value());
  EXPECT_NE(format_metrics(r.log.back()).find("\tn/a\t"), std::string::npos);
}

TEST(Train, RejectsBadInputs) {
  auto corpus = toy_corpus(4, 8);
  TrainConfig c;
  EXPECT_EQ(error_of([&] { train(small_model(), c, corpus, {}); }), ErrorKind::kDomain);
  c.batch_size = 0;
  EXPECT_EQ(error_of([&] { train(small_model(), c, corpus, corpus); }), ErrorKind::kConfig);
}

TEST(Train, DerivedSeedsDiffer) {
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  EXPECT_NE(derive_seed(1, 0), derive_seed(2, 0));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

TEST(Tagger, UnknownLabelsCountAsErrors) {
  auto corpus = toy_corpus(30, 9);
  Vocabularies vocab = build_vocab(corpus);
  Rng rng(1);
  Tagger tagger(JointModel(tiny_config(Architecture::kBiRnn, true, true, Task::kJoint), vocab.dims(), rng), vocab);
  std::vector<Utterance> odd{make_utterance({"hello"}, {"B-never.seen"}, "greeting")};
  auto cov = vocab_coverage(vocab, odd, true, true);
  EXPECT_EQ(cov.distinct_labels, 2u);
  EXPECT_EQ(cov.unknown_labels.size(), 2u);
  EXPECT_TRUE(cov.mismatched());
  auto report = tagger.evaluate(odd, 1);
  EXPECT_EQ(*report.intent_error, 100.0);
  EXPECT_EQ(report.slots->total.correct, 0u);
  EXPECT_FALSE(vocab_coverage(vocab, corpus, true, true).mismatched());
}

TEST(Tagger, PredictNamesLabels) {
  auto corpus = toy_corpus(30, 10);
  Vocabularies vocab = build_vocab(corpus);
  Rng rng(2);
  Tagger tagger(JointModel(tiny_config(Architecture::kEncDec, true, true, Task::kJoint), vocab.dims(), rng), vocab);
  std::vector<std::vector<std::string>> sentences{{"show", "me", "flights"}, {"zzz"}};
  for (int beam : {1, 3}) {
    auto p = tagger.predict(sentences, beam);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0].slots.size(), 3u);
    EXPECT_EQ(p[1].slots.size(), 1u);
    for (const auto& s : p[0].slots) EXPECT_TRUE(vocab.slots.contains(s));
    ASSERT_TRUE(p[0].intent.has_value());
    EXPECT_TRUE(vocab.intents.contains(*p[0].intent));
  }
  Tagger again = Tagger::from_checkpoint(Checkpoint{tagger.model().config(), vocab, tagger.model().params(), {}, 0});
  EXPECT_EQ(again.predict(sentences, 1)[0].slots, tagger.predict(sentences, 1)[0].slots);
}

TEST(Tagger, IntentAttentionFindsTheDiscriminatingWord) {
  // The "from ... please show me the flights|fares" templates differ only in
  // their last word, so a trained intent head has to look there.
  const auto corpus = generate_synthetic(default_grammar(), 1200, 5);
  const std::vector<Utterance> train_set(corpus.begin(), corpus.begin() + 1000);
  const std::vector<Utterance> rest(corpus.begin() + 1000, corpus.end());
  ModelConfig config;
  config.architecture = Architecture::kBiRnn;
  config.hidden = config.embedding_dim = config.label_embedding_dim = config.att_dim = 32;
  TrainConfig tc;
  tc.epochs = 8;
  tc.adam.lr = 0.005;
  const Tagger tagger = Tagger::from_checkpoint(train(config, tc, train_set, rest).best);

  double weight = 0.0, baseline = 0.0;
  std::size_t n = 0;
  for (const Prediction& p : tagger.predict(std::span<const Utterance>(rest), 1)) {
    const std::string& last = p.tokens.back();
    if (p.tokens.front() != "from" || (last != "flights" && last != "fares")) continue;
    ASSERT_EQ(p.intent_attention.steps(), 1u);
    weight += p.intent_attention.weights[0].back();
    baseline += 2.0 / static_cast<double>(p.tokens.size());
    ++n;
  }
  ASSERT_GE(n, 5u);
  EXPECT_GT(weight / static_cast<double>(n), baseline / static_cast<double>(n));
}

}  // namespace
}  // namespace slu
