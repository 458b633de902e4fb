#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "revsum/errors.hpp"
#include "revsum/gradcheck.hpp"
#include "revsum/gradient_suite.hpp"
#include "revsum/ops.hpp"
#include "revsum/random.hpp"
#include "revsum/serialize.hpp"
#include "test_util.hpp"

namespace revsum {
namespace {

using testing::expect_values;
using testing::to_vector;

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, bool grad = false) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = uniform(rng, -2.0, 2.0);
  return Tensor::matrix(r, c, v, grad);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  auto eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  expect_values(matmul(eye, m), {1, 2, 3, 4});
}

TEST(Matmul, SelectorRow) {
  auto sel = Tensor::matrix(2, 2, {1, 0, 0, 0});
  auto col = Tensor::matrix(2, 1, {5, 7});
  auto out = matmul(sel, col);
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  expect_values(out, {5, 0});
}

TEST(Matmul, MismatchNamesBothShapes) {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 2});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  std::vector<Tensor> params{random_matrix(3, 4, rng), random_matrix(4, 2, rng)};
  auto weights = random_matrix(3, 2, rng);
  auto report = check_gradients(
      [&] { return sum(mul(matmul(params[0], params[1]), weights)); }, params, 1e-6);
  EXPECT_EQ(report.checked, 20u);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

TEST(Softmax, UniformInput) {
  expect_values(softmax(Tensor::vector({0, 0, 0}), 0), {1.0 / 3, 1.0 / 3, 1.0 / 3});
}

TEST(Softmax, LnTwo) {
  expect_values(softmax(Tensor::vector({0, std::log(2.0)}), 0), {1.0 / 3, 2.0 / 3});
}

TEST(Softmax, ShiftInvariant) {
  Rng rng(5);
  auto x = random_matrix(3, 5, rng);
  auto shifted = add(x, Tensor::filled({3, 5}, 123.25));
  expect_values(softmax(shifted, 1), to_vector(softmax(x, 1)), 1e-12);
}

TEST(Softmax, AxisSumsAreOne) {
  Rng rng(6);
  auto x = scale(random_matrix(4, 6, rng), 50.0);
  for (std::size_t axis : {0u, 1u}) {
    auto p = softmax(x, axis);
    const std::size_t outer = axis == 1 ? 4 : 6;
    for (std::size_t o = 0; o < outer; ++o) {
      double total = 0.0;
      for (std::size_t i = 0; i < (axis == 1 ? 6u : 4u); ++i) {
        const double v = axis == 1 ? p.at(o, i) : p.at(i, o);
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Softmax, LargeInputsStayFinite) {
  auto p = softmax(Tensor::vector({1000.0, 1001.0, -1000.0}), 0);
  for (double v : p.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(LayerNorm, TwoElementRow) {
  auto out = layer_norm(Tensor::matrix(1, 2, {1, 3}), Tensor::filled({2}, 1.0),
                        Tensor::zeros({2}), 1e-12);
  expect_values(out, {-1, 1}, 1e-9);
}

TEST(LayerNorm, ConstantRowCollapsesToBias) {
  auto out = layer_norm(Tensor::matrix(1, 3, {5, 5, 5}), Tensor::filled({3}, 1.0),
                        Tensor::zeros({3}));
  expect_values(out, {0, 0, 0});
  auto shifted = layer_norm(Tensor::matrix(1, 3, {5, 5, 5}), Tensor::filled({3}, 2.0),
                            Tensor::vector({0.5, -1, 3}));
  expect_values(shifted, {0.5, -1, 3});
}

TEST(LayerNorm, RowsAreStandardised) {
  Rng rng(8);
  auto x = random_matrix(4, 8, rng);
  auto out = layer_norm(x, Tensor::filled({8}, 1.0), Tensor::zeros({8}), 1e-10);
  for (std::size_t r = 0; r < 4; ++r) {
    double mean = 0.0, var = 0.0;
    for (std::size_t c = 0; c < 8; ++c) mean += out.at(r, c);
    mean /= 8;
    for (std::size_t c = 0; c < 8; ++c) var += (out.at(r, c) - mean) * (out.at(r, c) - mean);
    var /= 8;
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_LT(std::abs(var - 1.0), 1e-6);
  }
}

TEST(AveragePool, ColumnMeans) {
  expect_values(average_pool(Tensor::matrix(2, 2, {1, 2, 3, 4})), {2, 3});
  expect_values(average_pool(Tensor::matrix(1, 2, {7, 8})), {7, 8});
}

TEST(AveragePool, PermutationInvariant) {
  auto a = average_pool(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6.5}));
  auto b = average_pool(Tensor::matrix(3, 2, {5, 6.5, 1, 2, 3, 4}));
  expect_values(a, to_vector(b), 1e-15);
}

TEST(AveragePool, EmptyIsAnError) {
  EXPECT_THROW(average_pool(Tensor::zeros({0, 3})), EmptySequenceError);
}

TEST(Concat, VectorsAndMatrices) {
  expect_values(concat(Tensor::vector({1, 2}), Tensor::vector({3}), 0), {1, 2, 3});
  auto wide = concat(Tensor::zeros({2, 3}), Tensor::zeros({2, 5}), 1);
  EXPECT_EQ(wide.shape(), (Shape{2, 8}));
  EXPECT_THROW(concat(Tensor::zeros({2, 3}), Tensor::zeros({3, 5}), 1), ShapeError);
}

TEST(Concat, SliceRecoversParts) {
  Rng rng(9);
  auto a = random_matrix(2, 3, rng);
  auto b = random_matrix(2, 5, rng);
  auto joined = concat(a, b, 1);
  expect_values(slice(joined, 1, 0, 3), to_vector(a), 0.0);
  expect_values(slice(joined, 1, 3, 8), to_vector(b), 0.0);
}

TEST(Elementwise, PointValues) {
  EXPECT_EQ(sigmoid(Tensor::scalar(0)).item(), 0.5);
  EXPECT_EQ(tanh(Tensor::scalar(0)).item(), 0.0);
  auto x = Tensor::vector({1.5, -2, 3});
  expect_values(add(x, Tensor::zeros({3})), {1.5, -2, 3}, 0.0);
  expect_values(mul(x, x), {2.25, 4, 9}, 0.0);
  expect_values(scale(x, 2), {3, -4, 6}, 0.0);
  EXPECT_THROW(add(x, Tensor::zeros({2})), ShapeError);
  EXPECT_THROW(mul(x, Tensor::zeros({3, 1})), ShapeError);
}

TEST(Elementwise, SigmoidStableAtExtremes) {
  auto s = sigmoid(Tensor::vector({-800, 800}));
  EXPECT_EQ(s[0], 0.0);
  EXPECT_EQ(s[1], 1.0);
}

TEST(Elementwise, GradientsWithinOneInAMillion) {
  Rng rng(10);
  using Unary = Tensor (*)(const Tensor&);
  for (Unary op : {Unary(&tanh), Unary(&sigmoid)}) {
    std::vector<Tensor> p{random_matrix(2, 3, rng)};
    auto report = check_gradients([&] { return sum(op(p[0])); }, p, 1e-6);
    EXPECT_LT(report.max_relative_error, 1e-6);
  }
  std::vector<Tensor> p{random_matrix(2, 3, rng), random_matrix(2, 3, rng)};
  EXPECT_LT(check_gradients([&] { return sum(add(p[0], p[1])); }, p, 1e-6)
                .max_relative_error,
            1e-6);
  EXPECT_LT(check_gradients([&] { return sum(mul(p[0], p[1])); }, p, 1e-6)
                .max_relative_error,
            1e-6);
  EXPECT_LT(check_gradients([&] { return sum(scale(p[0], 0.3)); }, p, 1e-6)
                .max_relative_error,
            1e-6);
}

TEST(Ops, InputsAreNotMutated) {
  Rng rng(11);
  auto x = random_matrix(3, 4, rng, true);
  const auto before = to_vector(x);
  auto y = layer_norm(softmax(tanh(x), 1), Tensor::filled({4}, 1.0), Tensor::zeros({4}));
  backward(sum(y));
  expect_values(x, before, 0.0);
}

TEST(Dropout, ZeroRateAndEvalAreIdentity) {
  Rng rng(12);
  auto x = random_matrix(4, 4, rng);
  expect_values(dropout(x, 0.0, true, rng), to_vector(x), 0.0);
  expect_values(dropout(x, 0.0, false, rng), to_vector(x), 0.0);
  expect_values(dropout(x, 0.7, false, rng), to_vector(x), 0.0);
}

TEST(Dropout, DropFractionNearRate) {
  Rng rng(13);
  auto x = Tensor::filled({100000}, 1.0);
  auto y = dropout(x, 0.5, true, rng);
  std::size_t dropped = 0;
  for (double v : y.values()) {
    if (v == 0.0) {
      ++dropped;
    } else {
      EXPECT_EQ(v, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(dropped) / 100000.0, 0.5, 0.01);
}

TEST(Dropout, RateOutsideRangeIsConfigError) {
  Rng rng(1);
  auto x = Tensor::zeros({3});
  EXPECT_THROW(dropout(x, 1.0, true, rng), ConfigError);
  EXPECT_THROW(dropout(x, -0.1, true, rng), ConfigError);
}

TEST(EmbeddingLookup, GatherRows) {
  auto table = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6});
  std::vector<int> ids{0, 0};
  expect_values(embedding_lookup(table, ids), {1, 2, 1, 2});
  auto empty = embedding_lookup(table, std::vector<int>{});
  EXPECT_EQ(empty.shape(), (Shape{0, 2}));
}

TEST(EmbeddingLookup, OutOfRangeNamesId) {
  auto table = Tensor::zeros({3, 2});
  std::vector<int> ids{1, 7};
  try {
    embedding_lookup(table, ids);
    FAIL() << "expected IndexError";
  } catch (const IndexError& e) {
    EXPECT_NE(std::string(e.what()).find('7'), std::string::npos);
  }
}

TEST(EmbeddingLookup, RepeatedIdsScatterAdd) {
  auto table = Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}, true);
  std::vector<int> ids{2, 0, 2};
  backward(sum(embedding_lookup(table, ids)));
  testing::expect_span(table.grad(), {1, 1, 0, 0, 2, 2}, 0.0);

  Rng rng(14);
  std::vector<Tensor> p{random_matrix(4, 3, rng)};
  auto w = random_matrix(3, 3, rng);
  auto report = check_gradients(
      [&] { return sum(mul(embedding_lookup(p[0], ids), w)); }, p, 1e-6);
  EXPECT_LT(report.max_relative_error, 1e-6);
}

TEST(CrossEntropy, UniformAndCertain) {
  auto uniform = Tensor::filled({5}, 0.2);
  for (std::size_t y = 0; y < 5; ++y) {
    EXPECT_NEAR(cross_entropy(uniform, y).item(), std::log(5.0), 1e-12);
  }
  EXPECT_EQ(cross_entropy(Tensor::vector({0, 1, 0, 0, 0}), 1).item(), 0.0);
  EXPECT_THROW(cross_entropy(uniform, 5), IndexError);
}

TEST(CrossEntropy, SoftmaxGradientIsPMinusOneHot) {
  auto logits = Tensor::vector({0.3, -1.2, 2.0, 0.5, -0.1}, true);
  auto p = softmax(logits, 0);
  backward(cross_entropy(p, 2));
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_NEAR(logits.grad()[i], p[i] - (i == 2 ? 1.0 : 0.0), 1e-12);
  }
}

TEST(Backward, SumGivesOnes) {
  auto x = Tensor::matrix(2, 2, {1, 2, 3, 4}, true);
  backward(sum(x));
  testing::expect_span(x.grad(), {1, 1, 1, 1}, 0.0);
}

TEST(Backward, SquareAtThree) {
  auto x = Tensor::scalar(3, true);
  backward(mul(x, x));
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto x = Tensor::scalar(3, true);
  auto loss = mul(x, x);
  backward(loss);
  backward(loss);
  EXPECT_EQ(x.grad()[0], 12.0);
  x.zero_grad();
  backward(loss);
  EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, NonScalarIsShapeError) {
  auto x = Tensor::vector({1, 2}, true);
  EXPECT_THROW(backward(scale(x, 2)), ShapeError);
}

TEST(Backward, DiamondGraphCountsEachUse) {
  auto x = Tensor::scalar(2, true);
  auto y = tanh(x);
  backward(add(mul(y, y), y));  // d/dx (y^2 + y) = (2y + 1)(1 - y^2)
  const double t = std::tanh(2.0);
  EXPECT_NEAR(x.grad()[0], (2 * t + 1) * (1 - t * t), 1e-15);
}

TEST(Backward, Deterministic) {
  auto run = [] {
    Rng rng(21);
    auto a = random_matrix(3, 3, rng, true);
    auto b = random_matrix(3, 3, rng, true);
    backward(sum(softmax(matmul(tanh(a), b), 1)));
    return std::pair{to_vector(a), std::vector<double>(a.grad().begin(), a.grad().end())};
  };
  EXPECT_EQ(run(), run());
}

TEST(NoGrad, RecordsNothing) {
  auto x = Tensor::scalar(1.5, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = mul(x, x);
  }
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Serialize, TensorRoundTripIsExact) {
  Rng rng(22);
  auto t = random_matrix(3, 5, rng);
  std::stringstream buf;
  io::write_tensor(buf, t);
  auto back = io::read_tensor(buf);
  EXPECT_EQ(back.shape(), t.shape());
  expect_values(back, to_vector(t), 0.0);
}

TEST(Serialize, HeaderLayoutIsLittleEndian) {
  std::stringstream buf;
  io::write_tensor(buf, Tensor::vector({1.0}));
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.size(), 4u + 8u + 8u);
  EXPECT_EQ(bytes.substr(0, 4), std::string("\x01\x00\x00\x00", 4));
  EXPECT_EQ(bytes.substr(4, 8), std::string("\x01\x00\x00\x00\x00\x00\x00\x00", 8));
  EXPECT_EQ(bytes.substr(12, 8), std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
}

TEST(Serialize, TruncatedStreamIsFormatError) {
  std::stringstream buf;
  io::write_tensor(buf, Tensor::vector({1.0, 2.0}));
  std::string bytes = buf.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(io::read_tensor(cut), FormatError);
}

TEST(GradientSuite, EveryOpPasses) {
  const auto outcomes = run_op_gradient_checks(1);
  EXPECT_GT(outcomes.size(), 90u);
  for (const auto& o : outcomes) {
    EXPECT_TRUE(o.passed()) << o.name << " " << o.max_relative_error;
    EXPECT_GT(o.checked, 0u) << o.name;
  }
}

}  // namespace
}  // namespace revsum
