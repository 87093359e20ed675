#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mtm/autodiff.hpp"
#include "mtm/gradcheck.hpp"
#include "mtm/optim.hpp"

using namespace mtm;
using namespace mtm::ad;

namespace {

Tensor<double> random_tensor(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1, 1);
  Tensor<double> t(std::move(s));
  for (double& v : t.data) v = d(rng);
  return t;
}

std::vector<double> values(Graph<double>& g, Var v) { return {g.value(v).begin(), g.value(v).end()}; }

}  // namespace

TEST(Tensor, ShapeAndValidation) {
  Tensor<double> t(Shape{2, 3});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(numel(Shape{4, 0, 2}), 0u);
  EXPECT_THROW(Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Graph, NonFiniteLossIsDiagnosed) {
  Graph<double> g;
  Var x = g.variable(Tensor<double>(Shape{1}, std::numeric_limits<double>::quiet_NaN()));
  EXPECT_THROW(g.backward(sum(g, x)), NumericError);
}

TEST(Ops, ShapeMismatchesThrow) {
  Graph<double> g;
  Var a = g.constant(Tensor<double>(Shape{2, 3}));
  Var b = g.constant(Tensor<double>(Shape{3, 2}));
  EXPECT_THROW(add(g, a, b), ShapeError);
  EXPECT_THROW(matmul(g, a, a), ShapeError);
  Var w = g.constant(Tensor<double>(Shape{3, 4, 2}));
  Var bias = g.constant(Tensor<double>(Shape{2}));
  EXPECT_THROW(conv1d(g, a, w, bias), ShapeError);  // 3 input channels expected by a, filter has 4
  EXPECT_THROW(categorical_logprob(g, a, 3), std::out_of_range);
  Var q0 = g.constant(Tensor<double>(Shape{1, 0}));
  Var k0 = g.constant(Tensor<double>(Shape{2, 0}));
  EXPECT_THROW(attention_scores(g, q0, k0), ShapeError);
}

TEST(Ops, ConvZeroInputGivesBias) {
  Graph<double> g;
  Var x = g.constant(Tensor<double>(Shape{5, 4}));
  Var w = g.constant(random_tensor({3, 4, 3}, 1));
  Var b = g.constant(Tensor<double>(Shape{3}, std::vector<double>{0.5, -1.0, 2.0}));
  const auto out = values(g, conv1d(g, x, w, b));
  ASSERT_EQ(out.size(), 15u);
  for (std::size_t l = 0; l < 5; ++l) {
    EXPECT_DOUBLE_EQ(out[l * 3 + 0], 0.5);
    EXPECT_DOUBLE_EQ(out[l * 3 + 1], -1.0);
    EXPECT_DOUBLE_EQ(out[l * 3 + 2], 2.0);
  }
}

TEST(Ops, ConvLengthOneUsesOnlyTheCentreTap) {
  Graph<double> g;
  Var x = g.constant(Tensor<double>(Shape{1, 1}, std::vector<double>{2.0}));
  Var w = g.constant(Tensor<double>(Shape{3, 1, 1}, std::vector<double>{10.0, 3.0, 100.0}));
  Var b = g.constant(Tensor<double>(Shape{1}, std::vector<double>{1.0}));
  Var y = conv1d(g, x, w, b);
  EXPECT_EQ(g.shape(y), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(g.scalar(y), 7.0);
}

TEST(Ops, AttentionSaturatesOnMatchingKey) {
  Graph<double> g;
  Var q = g.constant(Tensor<double>(Shape{1, 2}, std::vector<double>{50, 0}));
  Var k = g.constant(Tensor<double>(Shape{3, 2}, std::vector<double>{0, 1, 50, 0, 0, -1}));
  Var v = g.constant(Tensor<double>(Shape{3, 1}, std::vector<double>{1, 2, 3}));
  const AttentionResult r = softmax_attention(g, q, k, v);
  EXPECT_NEAR(g.value(r.weights)[1], 1.0, 1e-12);
  EXPECT_NEAR(g.scalar(r.output), 2.0, 1e-9);
}

TEST(Ops, IdenticalKeysGiveUniformWeights) {
  Graph<double> g;
  Var q = g.constant(random_tensor({2, 3}, 4));
  Var k = g.constant(Tensor<double>(Shape{4, 3}, 0.7));
  Var v = g.constant(random_tensor({4, 2}, 5));
  const AttentionResult r = softmax_attention(g, q, k, v);
  for (double w : g.value(r.weights)) EXPECT_NEAR(w, 0.25, 1e-15);
}

TEST(Ops, UniformLogitsLogprob) {
  Graph<double> g;
  Var logits = g.constant(Tensor<double>(Shape{6}, 1.3));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(g.scalar(categorical_logprob(g, logits, i)), -std::log(6.0), 1e-12);
  EXPECT_NEAR(g.scalar(categorical_entropy(g, logits)), std::log(6.0), 1e-12);
}

TEST(Ops, DenseIdentity) {
  Graph<double> g;
  Tensor<double> eye(Shape{3, 3});
  for (int i = 0; i < 3; ++i) eye.data[i * 3 + i] = 1;
  Var x = g.constant(Tensor<double>(Shape{3}, std::vector<double>{1, -2, 3}));
  Var y = dense(g, x, g.constant(eye), g.constant(Tensor<double>(Shape{3})));
  EXPECT_EQ(values(g, y), (std::vector<double>{1, -2, 3}));
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Graph<double> g;
  Var a = g.constant(random_tensor({7, 9}, 8));
  const auto s = values(g, row_softmax(g, scale(g, a, 30.0)));
  for (std::size_t r = 0; r < 7; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 9; ++c) {
      EXPECT_GE(s[r * 9 + c], 0.0);
      total += s[r * 9 + c];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}

TEST(Ops, BilstmWidthIndependentOfLength) {
  for (std::size_t L : {1u, 4u, 30u}) {
    Graph<double> g;
    Var x = g.constant(random_tensor({L, 3}, L));
    LstmWeights f{g.constant(random_tensor({3 + 5, 20}, 1)), g.constant(random_tensor({20}, 2))};
    LstmWeights b{g.constant(random_tensor({3 + 5, 20}, 3)), g.constant(random_tensor({20}, 4))};
    Var y = bilstm(g, x, f, b);
    EXPECT_EQ(g.shape(y), (Shape{10}));
    if (L == 1) {
      // a single column: both directions run the same one-step recurrence
      Var yf = lstm_final(g, x, f, false);
      Var yb = lstm_final(g, x, f, true);
      EXPECT_EQ(values(g, yf), values(g, yb));
    }
  }
}

TEST(Ops, ParamGradientsAccumulateIntoStore) {
  ParamStore<double> store;
  Parameter<double>& w = store.add("w", Shape{2});
  w.value.data = {1.5, -2.0};
  for (int rep = 0; rep < 2; ++rep) {
    Graph<double> g;
    g.backward(sum(g, square(g, g.param(w))));
  }
  EXPECT_DOUBLE_EQ(w.grad[0], 2 * 2 * 1.5);
  EXPECT_DOUBLE_EQ(w.grad[1], 2 * 2 * -2.0);
  store.zero_grad();
  EXPECT_EQ(w.grad, (std::vector<double>{0, 0}));
}

TEST(GradCheck, SuiteCoversEveryOpAtBothPrecisions) {
  GradCheckOptions opt;
  opt.cases_per_op = 20;
  const auto rows = run_gradcheck_suite(opt);
  EXPECT_EQ(rows.size(), gradcheck_op_names().size());
  for (const auto& r : rows) {
    EXPECT_TRUE(r.ok) << r.op << " err64=" << r.max_error64 << " err32=" << r.max_error32 << " worst " << r.worst_case;
    EXPECT_EQ(r.cases, 20u) << r.op;
    EXPECT_TRUE(r.covers_length_one) << r.op;
    EXPECT_LT(r.max_error64, 1e-6) << r.op;
    EXPECT_LT(r.max_error32, 1e-4) << r.op;
  }
}

// --- Adam ------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
  ParamStore<double> store;
  store.add("w", Shape{3}).value.data = {1, 2, 3};
  Adam<double> opt(AdamConfig{});
  opt.step(store);
  EXPECT_EQ(store.at("w").value.data, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(opt.steps(), 1);
}

TEST(Adam, ConstantGradientApproachesLrSign) {
  ParamStore<double> store;
  store.add("w", Shape{2});
  Adam<double> opt(AdamConfig{0.01});
  double last0 = 0, last1 = 0;
  for (int i = 0; i < 500; ++i) {
    auto& p = store.at("w");
    p.grad = {0.3, -7.0};
    const double b0 = p.value.data[0], b1 = p.value.data[1];
    opt.step(store);
    last0 = p.value.data[0] - b0;
    last1 = p.value.data[1] - b1;
  }
  EXPECT_NEAR(last0, -0.01, 1e-6);
  EXPECT_NEAR(last1, 0.01, 1e-6);
  EXPECT_EQ(store.at("w").grad, (std::vector<double>{0, 0}));
}

TEST(Adam, QuadraticBowlConverges) {
  ParamStore<double> store;
  store.add("w", Shape{4}).value.data = {1.0, -0.5, 0.25, 2.0};
  Adam<double> opt(AdamConfig{1e-2});
  for (int i = 0; i < 2000; ++i) {
    Graph<double> g;
    g.backward(sum(g, square(g, g.param(store.at("w")))));
    opt.step(store);
  }
  double norm = 0;
  for (double v : store.at("w").value.data) norm += v * v;
  EXPECT_LT(std::sqrt(norm), 1e-3);
}

TEST(Adam, NanGradientIsDiagnosed) {
  ParamStore<double> store;
  store.add("w", Shape{1});
  store.at("w").grad = {std::numeric_limits<double>::infinity()};
  Adam<double> opt(AdamConfig{});
  EXPECT_THROW(opt.step(store), NumericError);
  EXPECT_EQ(store.at("w").value.data[0], 0.0);
}
