// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "slu/autograd.hpp"
#include "slu/error.hpp"
#include "slu/grad_check.hpp"
#include "slu/tensor.hpp"
#include "test_util.hpp"

namespace slu {
namespace {

using testing::random_mat;
using testing::random_param;

Mat row(std::initializer_list<double> values) {
  Mat m(1, static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) m(0, i++) = v;
  return m;
}

TEST(Tensor, ShapeAndBuffers) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rows(), 6u);
  EXPECT_EQ(t.cols(), 4u);
  EXPECT_EQ(t.grad().size(), 24u);
  EXPECT_THROW(Tensor({2, 0}), Error);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>(3, 0.0)), Error);
}

TEST(Tensor, AllFinite) {
  Tensor t({2}, std::vector<double>{1.0, 2.0});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
}

TEST(ParamStore, RejectsDuplicatesAndIteratesByName) {
  ParamStore s;
  s.add("b", {2});
  s.add("a", {3});
  EXPECT_THROW(s.add("a", {1}), Error);
  std::vector<std::string> names;
  for (const auto& [name, t] : s) names.push_back(name);
  EXPECT_EQ(names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(s.scalar_count(), 5u);
}

TEST(Rng, SeededStreamsRepeat) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
  Rng d(5);
  for (int i = 0; i < 1000; ++i) {
    const double u = d.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(d.below(7), 7u);
  }
}

TEST(Matmul, IdentityAndZero) {
  Rng rng(1);
  Graph g;
  const Mat b = random_mat(rng, 2, 3);
  Var vb = g.constant(b);
  EXPECT_EQ(Mat(g.value(matmul(g, g.constant(Mat::Identity(2, 2)), vb))), b);
  EXPECT_TRUE(g.value(matmul(g, g.constant(Mat::Zero(4, 2)), vb)).isZero(0.0));
}

TEST(Matmul, MatchesTripleLoop) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Mat a = random_mat(rng, 3, 4);
    const Mat b = random_mat(rng, 4, 2);
    Graph g;
    const Mat c = g.value(matmul(g, g.constant(a), g.constant(b)));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 2; ++j) {
        double expected = 0.0;
        for (int k = 0; k < 4; ++k) expected += a(i, k) * b(k, j);
        EXPECT_NEAR(c(i, j), expected, 1e-12);
      }
    }
  }
}

TEST(Matmul, ShapeMismatchNamesShapes) {
  Graph g;
  try {
    matmul(g, g.constant(Mat::Zero(2, 3)), g.constant(Mat::Zero(2, 3)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimension);
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos) << e.what();
  }
}

TEST(Elementwise, ClosedForms) {
  Graph g;
  EXPECT_DOUBLE_EQ(g.value(sigmoid(g, g.constant(row({0.0}))))(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(g.value(tanh(g, g.constant(row({0.0}))))(0, 0), 0.0);
  const Mat joined = g.value(concat(g, {g.constant(row({1, 2})), g.constant(row({3}))}));
  EXPECT_EQ(joined, row({1, 2, 3}));
  EXPECT_THROW(add(g, g.constant(Mat::Zero(2, 3)), g.constant(Mat::Zero(2, 2))), Error);
  EXPECT_THROW(concat(g, {g.constant(Mat::Zero(2, 1)), g.constant(Mat::Zero(3, 1))}), Error);
}

TEST(Elementwise, SigmoidIsStableAtExtremes) {
  Graph g;
  const Mat s = g.value(sigmoid(g, g.constant(row({-800.0, 800.0}))));
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(0, 1), 1.0);
}

TEST(Softmax, Examples) {
  Graph g;
  const Mat u = g.value(softmax(g, g.constant(row({0, 0, 0}))));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(u(0, i), 1.0 / 3.0, 1e-15);
  const Mat p = g.value(softmax(g, g.constant(row({std::log(1.0), std::log(2.0), std::log(3.0)}))));
  EXPECT_NEAR(p(0, 0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(p(0, 1), 2.0 / 6.0, 1e-15);
  EXPECT_NEAR(p(0, 2), 3.0 / 6.0, 1e-15);
  try {
    softmax(g, g.constant(Mat(1, 0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(Softmax, ShiftInvariantAndNormalized) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const Mat z = random_mat(rng, 3, 7, 20.0);
    const double shift = rng.uniform(-500.0, 500.0);
    Graph g;
    const Mat p = g.value(softmax(g, g.constant(z)));
    const Mat q = g.value(softmax(g, g.constant((z.array() + shift).matrix())));
    for (int r = 0; r < 3; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-9);
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GT(p.minCoeff(), 0.0);
  }
}

TEST(Softmax, MaskGivesExactZeros) {
  Graph g;
  Mat mask(1, 3);
  mask << 1, 0, 1;
  const Mat p = g.value(softmax(g, g.constant(row({5, 100, 5})), &mask));
  EXPECT_EQ(p(0, 1), 0.0);
  EXPECT_NEAR(p(0, 0), 0.5, 1e-15);
}

TEST(CrossEntropy, Examples) {
  Graph g;
  const std::vector<int> t1{1};
  EXPECT_NEAR(g.value(cross_entropy(g, g.constant(row({0.25, 0.25, 0.25, 0.25})), t1))(0, 0), std::log(4.0), 1e-15);
  EXPECT_NEAR(g.value(cross_entropy(g, g.constant(row({0.0, 1.0})), t1))(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(g.value(cross_entropy(g, g.constant(row({0.5, 0.25, 0.25})), t1))(0, 0), 1.3862943611198906, 1e-12);
  const std::vector<int> bad{3};
  try {
    cross_entropy(g, g.constant(row({0.5, 0.5})), bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDomain);
  }
}

TEST(SoftmaxCrossEntropy, FusedBackwardIsPMinusOneHot) {
  Rng rng(3);
  const Mat z = random_mat(rng, 2, 4);
  Graph g;
  Var logits = g.input(z);
  const std::vector<int> targets{2, 0};
  const std::vector<double> weights{1.0, 1.0};
  Var loss = softmax_cross_entropy(g, logits, targets, weights);
  g.backward(loss);
  Graph h(false);
  const Mat p = h.value(softmax(h, h.constant(z)));
  Mat expected = p;
  expected(0, 2) -= 1.0;
  expected(1, 0) -= 1.0;
  EXPECT_LT((Mat(g.grad(logits)) - expected).cwiseAbs().maxCoeff(), 1e-15);
  const double unfused = -std::log(p(0, 2)) - std::log(p(1, 0));
  EXPECT_NEAR(g.value(loss)(0, 0), unfused, 1e-12);
}

TEST(GradCheck, SquareAtThree) {
  ParamStore store;
  store.add("theta", {1})[0] = 3.0;
  const auto report = grad_check(store, [](Graph& g, ParamStore& s) {
    Var t = g.param(s.at("theta"));
    return sum(g, mul(g, t, t));
  });
  ASSERT_EQ(report.params.size(), 1u);
  EXPECT_NEAR(report.params[0].analytic, 6.0, 1e-12);
  EXPECT_NEAR(report.params[0].numeric, 6.0, 1e-9);
  EXPECT_TRUE(report.passed);
}

TEST(GradCheck, NonFiniteLossAborts) {
  ParamStore store;
  store.add("theta", {1})[0] = 0.0;
  try {
    grad_check(store, [](Graph& g, ParamStore& s) {
      Var t = g.param(s.at("theta"));
      return sum(g, g.emit(Mat::Constant(1, 1, std::nan("")), {t}, [](Graph&, Var) {}));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumeric);
  }
}

TEST(GradCheck, CatchesAWrongGradient) {
  ParamStore store;
  store.add("theta", {1})[0] = 2.0;
  const auto report = grad_check(store, [](Graph& g, ParamStore& s) {
    Var t = g.param(s.at("theta"));
    // value t, claimed gradient 2 instead of 1
    Mat v = g.value(t);
    return sum(g, g.emit(v, {t}, [t](Graph& g, Var self) { g.grad(t) += 2.0 * g.grad(self); }));
  });
  EXPECT_FALSE(report.passed);
}

// Every primitive's backward against central differences on random inputs.
struct PrimitiveCase {
  std::string name;
  std::function<Var(Graph&, ParamStore&, Rng&)> build;
  std::function<void(ParamStore&, Rng&)> setup;
};

std::vector<PrimitiveCase> primitive_cases() {
  auto two = [](ParamStore& s, Rng& rng) {
    random_param(s, "a", {3, 4}, rng);
    random_param(s, "b", {3, 4}, rng);
  };
  return {
      {"matmul",
       [](Graph& g, ParamStore& s, Rng&) {
         return matmul(g, g.param(s.at("a")), g.param(s.at("w")));
       },
       [](ParamStore& s, Rng& rng) {
         random_param(s, "a", {3, 4}, rng);
         random_param(s, "w", {4, 2}, rng);
       }},
      {"add", [](Graph& g, ParamStore& s, Rng&) { return add(g, g.param(s.at("a")), g.param(s.at("b"))); }, two},
      {"add_broadcast",
       [](Graph& g, ParamStore& s, Rng&) { return add(g, g.param(s.at("a")), g.param(s.at("r"))); },
       [](ParamStore& s, Rng& rng) {
         random_param(s, "a", {3, 4}, rng);
         random_param(s, "r", {4}, rng);
       }},
      {"mul", [](Graph& g, ParamStore& s, Rng&) { return mul(g, g.param(s.at("a")), g.param(s.at("b"))); }, two},
      {"sigmoid", [](Graph& g, ParamStore& s, Rng&) { return sigmoid(g, g.param(s.at("a"))); }, two},
      {"tanh", [](Graph& g, ParamStore& s, Rng&) { return tanh(g, g.param(s.at("a"))); }, two},
      {"concat",
       [](Graph& g, ParamStore& s, Rng&) { return concat(g, {g.param(s.at("a")), g.param(s.at("b"))}); }, two},
      {"slice", [](Graph& g, ParamStore& s, Rng&) { return slice_cols(g, g.param(s.at("a")), 1, 2); }, two},
      {"gather",
       [](Graph& g, ParamStore& s, Rng&) {
         const std::vector<int> ids{2, 0, 2, 1};
         return gather_rows(g, g.param(s.at("a")), ids);
       },
       two},
      {"softmax", [](Graph& g, ParamStore& s, Rng&) { return softmax(g, g.param(s.at("a"))); }, two},
      {"softmax_masked",
       [](Graph& g, ParamStore& s, Rng&) {
         Mat mask = Mat::Ones(3, 4);
         mask(0, 1) = 0.0;
         mask(2, 3) = 0.0;
         return softmax(g, g.param(s.at("a")), &mask);
       },
       two},
      {"cross_entropy",
       [](Graph& g, ParamStore& s, Rng&) {
         const std::vector<int> t{1, -1, 3};
         return cross_entropy(g, softmax(g, g.param(s.at("a"))), t);
       },
       two},
      {"softmax_cross_entropy",
       [](Graph& g, ParamStore& s, Rng&) {
         const std::vector<int> t{1, 0, 3};
         const std::vector<double> w{0.5, 1.0, 2.0};
         return softmax_cross_entropy(g, g.param(s.at("a")), t, w);
       },
       two},
      {"blend_rows",
       [](Graph& g, ParamStore& s, Rng&) {
         const std::vector<double> keep{1.0, 0.0, 1.0};
         return blend_rows(g, g.param(s.at("a")), g.param(s.at("b")), keep);
       },
       two},
      {"lstm_cell",
       [](Graph& g, ParamStore& s, Rng&) {
         Var gates = g.param(s.at("gates"));
         Var c = lstm_cell_state(g, gates, g.param(s.at("c")));
         return lstm_hidden(g, gates, c);
       },
       [](ParamStore& s, Rng& rng) {
         random_param(s, "gates", {2, 12}, rng, 2.0);
         random_param(s, "c", {2, 3}, rng);
       }},
      {"additive_scores",
       [](Graph& g, ParamStore& s, Rng&) {
         std::vector<Var> keys{g.param(s.at("k0")), g.param(s.at("k1")), g.param(s.at("k2"))};
         return additive_scores(g, g.param(s.at("q")), keys, g.param(s.at("v")));
       },
       [](ParamStore& s, Rng& rng) {
         random_param(s, "q", {2, 3}, rng);
         for (const char* k : {"k0", "k1", "k2"}) random_param(s, k, {2, 3}, rng);
         random_param(s, "v", {3}, rng);
       }},
      {"weighted_sum",
       [](Graph& g, ParamStore& s, Rng&) {
         std::vector<Var> values{g.param(s.at("h0")), g.param(s.at("h1"))};
         return weighted_sum(g, softmax(g, g.param(s.at("w"))), values);
       },
       [](ParamStore& s, Rng& rng) {
         random_param(s, "w", {2, 2}, rng);
         random_param(s, "h0", {2, 3}, rng);
         random_param(s, "h1", {2, 3}, rng);
       }},
  };
}

TEST(GradCheck, EveryPrimitiveOverManySeeds) {
  for (const auto& c : primitive_cases()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed);
      ParamStore store;
      c.setup(store, rng);
      Graph probe(false);
      Var out = c.build(probe, store, rng);
      const Mat weights = random_mat(rng, probe.rows(out), probe.cols(out));
      const auto report = grad_check(store, [&](Graph& g, ParamStore& s) {
        Rng unused(0);
        return sum(g, mul_constant(g, c.build(g, s, unused), weights));
      });
      worst = std::max(worst, report.max_relative_error);
    }
    EXPECT_LT(worst, 1e-4) << c.name;
  }
}

TEST(Autograd, SharedInputsAccumulate) {
  ParamStore s;
  s.add("x", {1})[0] = 3.0;
  Graph g;
  Var x = g.param(s.at("x"));
  g.backward(sum(g, add(g, mul(g, x, x), x)));
  EXPECT_DOUBLE_EQ(s.at("x").grad()[0], 7.0);
}

TEST(Autograd, ReadOnlyParamsReceiveNoGradient) {
  ParamStore s;
  s.add("x", {1})[0] = 3.0;
  Graph g;
  Var x = g.param(static_cast<const Tensor&>(s.at("x")));
  EXPECT_FALSE(g.requires_grad(x));
  Var y = g.input(Mat::Constant(1, 1, 2.0));
  g.backward(sum(g, mul(g, x, y)));
  EXPECT_EQ(s.at("x").grad()[0], 0.0);
  EXPECT_DOUBLE_EQ(g.grad(y)(0, 0), 3.0);
}

TEST(Autograd, ArgmaxPrefersLowestIndexOnTies) {
  Mat m(2, 3);
  m << 1, 5, 5, 2, 2, 2;
  EXPECT_EQ(argmax_rows(ConstMatMap(m.data(), 2, 3)), (std::vector<int>{1, 0}));
}

}  // namespace
}  // namespace slu
