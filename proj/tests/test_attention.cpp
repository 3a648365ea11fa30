// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "slu/attention.hpp"
#include "slu/error.hpp"
#include "slu/grad_check.hpp"
#include "test_util.hpp"

namespace slu {
namespace {

using testing::random_mat;

struct Fixture {
  ParamStore store;
  AttentionParams params;
  std::vector<Mat> states;
  Mat query;

  Fixture(std::uint64_t seed, std::size_t steps, std::size_t qdim = 3, std::size_t kdim = 4, std::size_t adim = 5) {
    Rng rng(seed);
    params = AttentionParams::create(store, "att", qdim, kdim, adim, rng, 0.8);
    for (std::size_t j = 0; j < steps; ++j) states.push_back(random_mat(rng, 1, static_cast<Eigen::Index>(kdim)));
    query = random_mat(rng, 1, static_cast<Eigen::Index>(qdim));
  }

  AttentionStep run(Graph& g, ParamBinder& binder) {
    auto att = bind(binder, params);
    std::vector<Var> values;
    for (const auto& s : states) values.push_back(g.constant(s));
    const std::vector<int> lengths{static_cast<int>(states.size())};
    auto memory = make_memory(g, att, values, lengths);
    return attend(g, att, g.constant(query), memory);
  }
};

TEST(Attention, ZeroVGivesZeroScoresAndUniformWeights) {
  Fixture f(1, 4);
  for (double& x : f.store.at("att.v").data()) x = 0.0;
  Graph g;
  ParamBinder binder(g, f.store);
  auto step = f.run(g, binder);
  for (int j = 0; j < 4; ++j) {
    EXPECT_EQ(g.value(step.scores)(0, j), 0.0);
    EXPECT_DOUBLE_EQ(g.value(step.weights)(0, j), 0.25);
  }
  Mat mean = Mat::Zero(1, 4);
  for (const auto& s : f.states) mean += s / 4.0;
  EXPECT_LT((Mat(g.value(step.context)) - mean).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Attention, IgnoresQueryWhenWsIsZero) {
  Fixture f(2, 3);
  for (double& x : f.store.at("att.ws").data()) x = 0.0;
  f.states[2] = f.states[0];
  Graph g;
  ParamBinder binder(g, f.store);
  auto step = f.run(g, binder);
  EXPECT_EQ(g.value(step.scores)(0, 0), g.value(step.scores)(0, 2));
  const double before = g.value(step.scores)(0, 1);
  f.query *= -3.0;
  Graph h;
  ParamBinder binder2(h, f.store);
  EXPECT_EQ(h.value(f.run(h, binder2).scores)(0, 1), before);
}

TEST(Attention, ScoresMatchScalarFormula) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Fixture f(seed, 5);
    Graph g;
    ParamBinder binder(g, f.store);
    auto step = f.run(g, binder);
    const Tensor& ws = f.store.at("att.ws");
    const Tensor& wh = f.store.at("att.wh");
    const Tensor& v = f.store.at("att.v");
    for (int j = 0; j < 5; ++j) {
      double e = 0.0;
      for (int a = 0; a < 5; ++a) {
        double pre = 0.0;
        for (int k = 0; k < 3; ++k) pre += f.query(0, k) * ws[k * 5 + a];
        for (int k = 0; k < 4; ++k) pre += f.states[j](0, k) * wh[k * 5 + a];
        e += v[a] * std::tanh(pre);
      }
      EXPECT_NEAR(g.value(step.scores)(0, j), e, 1e-12);
      const Mat q = f.query, st = f.states[j];
      EXPECT_NEAR(score(ConstMatMap(q.data(), 1, 3), ConstMatMap(st.data(), 1, 4), ws.matrix(), wh.matrix(),
                        v.matrix()),
                  e, 1e-12);
    }
    EXPECT_NEAR(g.value(step.weights).sum(), 1.0, 1e-12);
  }
}

TEST(Attention, SingleStateGetsAllTheWeight) {
  Fixture f(3, 1);
  Graph g;
  ParamBinder binder(g, f.store);
  auto step = f.run(g, binder);
  EXPECT_EQ(g.value(step.weights)(0, 0), 1.0);
  EXPECT_LT((Mat(g.value(step.context)) - f.states[0]).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Attention, WeightsFollowSoftmaxOfScores) {
  Graph g;
  Mat e(1, 3);
  e << 50.0, 0.0, 0.0;
  Var w = softmax(g, g.constant(e));
  EXPECT_NEAR(g.value(w)(0, 0), 1.0, 1e-20);
  EXPECT_GT(g.value(w)(0, 1), 0.0);
  EXPECT_NEAR(g.value(w)(0, 1), std::exp(-50.0), 1e-30);
}

TEST(Attention, MaskExcludesPaddedStates) {
  Fixture f(4, 4);
  Graph g;
  ParamBinder binder(g, f.store);
  auto att = bind(binder, f.params);
  std::vector<Var> values;
  for (const auto& s : f.states) values.push_back(g.constant(Mat(s.replicate(2, 1))));
  const std::vector<int> lengths{4, 2};
  auto memory = make_memory(g, att, values, lengths);
  auto step = attend(g, att, g.constant(f.query), memory);
  EXPECT_EQ(g.value(step.weights)(1, 2), 0.0);
  EXPECT_EQ(g.value(step.weights)(1, 3), 0.0);
  EXPECT_NEAR(g.value(step.weights).row(1).sum(), 1.0, 1e-15);

  // Row 1 equals attention over its two real states alone.
  Fixture two = f;
  two.states.resize(2);
  Graph h;
  ParamBinder binder2(h, two.store);
  auto alone = two.run(h, binder2);
  for (int j = 0; j < 2; ++j) EXPECT_NEAR(g.value(step.weights)(1, j), h.value(alone.weights)(0, j), 1e-15);
}

TEST(Attention, AppendedMemoryGrowsCausally) {
  Fixture f(5, 3);
  Graph g;
  ParamBinder binder(g, f.store);
  auto att = bind(binder, f.params);
  AttentionMemory memory;
  std::vector<Mat> seen;
  for (std::size_t j = 0; j < 3; ++j) {
    append_memory(g, att, memory, g.constant(f.states[j]));
    auto step = attend(g, att, g.constant(f.query), memory);
    ASSERT_EQ(g.cols(step.weights), static_cast<Eigen::Index>(j + 1));
    EXPECT_NEAR(g.value(step.weights).sum(), 1.0, 1e-15);
  }
}

TEST(Attention, GradCheck) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Fixture f(seed, 4);
    Rng rng(seed + 100);
    testing::random_param(f.store, "q", {2, 3}, rng);
    for (int j = 0; j < 4; ++j) testing::random_param(f.store, "h" + std::to_string(j), {2, 4}, rng);
    const Mat w = random_mat(rng, 2, 4);
    auto report = grad_check(f.store, [&](Graph& g, ParamStore& s) {
      ParamBinder binder(g, s);
      auto att = bind(binder, f.params);
      std::vector<Var> values;
      for (int j = 0; j < 4; ++j) values.push_back(binder("h" + std::to_string(j)));
      const std::vector<int> lengths{4, 3};
      auto memory = make_memory(g, att, values, lengths);
      auto step = attend(g, att, binder("q"), memory);
      return sum(g, mul_constant(g, step.context, w));
    });
    EXPECT_LT(report.max_relative_error, 1e-4) << "seed " << seed;
  }
}

TEST(Attention, EmptyMemoryIsADomainError) {
  Fixture f(6, 1);
  Graph g;
  ParamBinder binder(g, f.store);
  auto att = bind(binder, f.params);
  try {
    attend(g, att, g.constant(f.query), AttentionMemory{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(Attention, RecordRowCopiesOneRow) {
  Fixture f(7, 3);
  Graph g;
  ParamBinder binder(g, f.store);
  std::vector<AttentionStep> steps{f.run(g, binder), f.run(g, binder)};
  auto rec = record_row(g, steps, 0, 3);
  ASSERT_EQ(rec.steps(), 2u);
  ASSERT_EQ(rec.weights[1].size(), 3u);
  EXPECT_EQ(rec.weights[1][2], g.value(steps[1].weights)(0, 2));
  EXPECT_EQ(rec.contexts[0].size(), 4u);
}

}  // namespace
}  // namespace slu
