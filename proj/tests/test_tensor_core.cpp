// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "potter/error.hpp"
#include "potter/ops.hpp"
#include "potter/rng.hpp"
#include "test_util.hpp"

using namespace potter;
using potter::testing::expect_tensor_near;
using potter::testing::grad_error;

TEST(Tensor, ShapeMustMatchValueCount) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), Error);
  EXPECT_THROW(Tensor(Shape{0, 2}), Error);
  Tensor t({2, 3});
  EXPECT_EQ(t.size(), 6u);
}

TEST(Tensor, MultiIndexIsRowMajor) {
  Tensor t({2, 3}, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(t.at({1, 0}), 3.0);
  EXPECT_EQ(t.at({0, 2}), 2.0);
  EXPECT_THROW(t.at({2, 0}), Error);
}

TEST(AxisMean, HandValues) {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 2}, {1, 2, 3, 4}));
  expect_tensor_near(tape.value(axis_mean(tape, x, 1)), Tensor({2, 1}, {1.5, 3.5}), 0.0);
  expect_tensor_near(tape.value(axis_mean(tape, x, 0)), Tensor({1, 2}, {2, 3}), 0.0);
}

TEST(AxisMean, ConstantStaysConstant) {
  Tape tape;
  Var x = tape.leaf(Tensor::full({3, 4, 5}, 2.5));
  for (std::size_t axis = 0; axis < 3; ++axis) {
    const Tensor& m = tape.value(axis_mean(tape, x, axis));
    EXPECT_EQ(m.shape()[axis], 1u);
    for (double v : m.values()) EXPECT_DOUBLE_EQ(v, 2.5);
  }
}

TEST(AxisMean, RejectsBadAxis) {
  Tape tape;
  Var x = tape.leaf(Tensor({2, 2}));
  EXPECT_THROW(axis_mean(tape, x, 2), Error);
}

TEST(AxisMean, CommutesWithChannelPermutation) {
  CounterRng rng(11);
  Tensor x = uniform_tensor(rng, {4, 3, 5}, -1, 1);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Tensor px(x.shape());
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 15; ++i) px[c * 15 + i] = x[perm[c] * 15 + i];
  for (std::size_t axis : {1u, 2u}) {
    Tape tape;
    const Tensor m = tape.value(axis_mean(tape, tape.leaf(x), axis));
    const Tensor pm = tape.value(axis_mean(tape, tape.leaf(px), axis));
    const std::size_t per = m.size() / 4;
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < per; ++i) EXPECT_EQ(pm[c * per + i], m[perm[c] * per + i]);
  }
}

TEST(Matmul, OuterProduct) {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 1}, {1.5, 3.5}));
  Var b = tape.leaf(Tensor({1, 2}, {2, 3}));
  expect_tensor_near(tape.value(matmul(tape, a, b)), Tensor({2, 2}, {3, 4.5, 7, 10.5}), 0.0);
}

TEST(Matmul, IdentityAndZeros) {
  CounterRng rng(3);
  Tensor v = uniform_tensor(rng, {3, 2}, -1, 1);
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tape tape;
  Var vv = tape.leaf(v);
  expect_tensor_near(tape.value(matmul(tape, tape.leaf(eye), vv)), v, 0.0);
  const Tensor z = tape.value(matmul(tape, tape.leaf(Tensor({3, 3})), vv));
  for (double x : z.values()) EXPECT_EQ(x, 0.0);
}

TEST(Matmul, BatchedAndMismatch) {
  Tape tape;
  Var a = tape.leaf(Tensor::full({2, 2, 3}, 1.0));
  Var b = tape.leaf(Tensor::full({2, 3, 4}, 2.0));
  const Tensor& c = tape.value(matmul(tape, a, b));
  EXPECT_EQ(c.shape(), (Shape{2, 2, 4}));
  for (double x : c.values()) EXPECT_EQ(x, 6.0);
  EXPECT_THROW(matmul(tape, a, a), Error);
  EXPECT_THROW(matmul(tape, a, tape.leaf(Tensor::full({3, 3, 4}, 1.0))), Error);
}

TEST(ReshapePermute, Examples) {
  Tape tape;
  Var v = tape.leaf(Tensor::from({1, 2, 3, 4}));
  Var m = reshape(tape, v, {2, 2});
  expect_tensor_near(tape.value(m), Tensor({2, 2}, {1, 2, 3, 4}), 0.0);
  expect_tensor_near(tape.value(permute(tape, m, {1, 0})), Tensor({2, 2}, {1, 3, 2, 4}), 0.0);
  EXPECT_THROW(reshape(tape, v, {3}), Error);
  EXPECT_THROW(permute(tape, m, {0, 0}), Error);
  EXPECT_THROW(permute(tape, m, {0}), Error);

  Var d = tape.leaf(Tensor({4, 1, 1}, {1, 2, 3, 4}));
  Var round = reshape(tape, reshape(tape, d, {1, 2, 2}), {4, 1, 1});
  EXPECT_EQ(tape.value(round), tape.value(d));
}

TEST(ReshapePermute, RoundTripsAreExactProperty) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(seed);
    const Shape shape{1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(3)};
    std::vector<std::size_t> order{0, 1, 2, 3};
    for (std::size_t i = 3; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
    std::vector<std::size_t> inverse(4);
    for (std::size_t i = 0; i < 4; ++i) inverse[order[i]] = i;
    Tensor x = uniform_tensor(rng, shape, -1, 1);
    Tape tape;
    Var xv = tape.leaf(x);
    EXPECT_EQ(tape.value(permute(tape, permute(tape, xv, order), inverse)), x);
    EXPECT_EQ(tape.value(reshape(tape, reshape(tape, xv, {x.size()}), shape)), x);
  }
}

TEST(DepthwiseConv, IdentityKernel) {
  CounterRng rng(5);
  Tensor x = uniform_tensor(rng, {2, 3, 4}, -1, 1);
  Tensor w({2, 3, 3});
  w.at({0, 1, 1}) = 1.0;
  w.at({1, 1, 1}) = 1.0;
  Tape tape;
  Var y = depthwise_conv3x3(tape, tape.leaf(x), tape.leaf(w), tape.leaf(Tensor({2})));
  expect_tensor_near(tape.value(y), x, 0.0);
}

TEST(DepthwiseConv, ZeroWeightsGiveBias) {
  Tape tape;
  Var y = depthwise_conv3x3(tape, tape.leaf(Tensor::full({2, 3, 3}, 7.0)),
                            tape.leaf(Tensor({2, 3, 3})), tape.leaf(Tensor::from({0.5, -2.0})));
  const Tensor& out = tape.value(y);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(out[i], 0.5);
    EXPECT_EQ(out[9 + i], -2.0);
  }
}

TEST(DepthwiseConv, OnesKernelCountsNeighbours) {
  Tape tape;
  Var y = depthwise_conv3x3(tape, tape.leaf(Tensor::full({1, 3, 3}, 1.0)),
                            tape.leaf(Tensor::full({1, 3, 3}, 1.0)), tape.leaf(Tensor({1})));
  expect_tensor_near(tape.value(y), Tensor({1, 3, 3}, {4, 6, 4, 6, 9, 6, 4, 6, 4}), 0.0);
}

TEST(DepthwiseConv, ChannelMismatch) {
  Tape tape;
  EXPECT_THROW(depthwise_conv3x3(tape, tape.leaf(Tensor({2, 3, 3})),
                                 tape.leaf(Tensor({3, 3, 3})), tape.leaf(Tensor({2}))),
               Error);
  EXPECT_THROW(depthwise_conv3x3(tape, tape.leaf(Tensor({2, 3, 3})),
                                 tape.leaf(Tensor({2, 3, 3})), tape.leaf(Tensor({3}))),
               Error);
}

TEST(LayerNorm, Examples) {
  Tape tape;
  Var one = tape.leaf(Tensor::full({2}, 1.0));
  Var zero = tape.leaf(Tensor({2}));
  // Constant per position normalizes to zero.
  Var c = tape.leaf(Tensor::full({2, 2, 2}, 3.0));
  for (double v : tape.value(layer_norm(tape, c, one, zero)).values()) EXPECT_EQ(v, 0.0);

  Var x = tape.leaf(Tensor({2, 1, 1}, {1, 3}));
  expect_tensor_near(tape.value(layer_norm(tape, x, one, zero, 1e-300)),
                     Tensor({2, 1, 1}, {-1, 1}), 1e-12);

  Var fives = layer_norm(tape, x, zero, tape.leaf(Tensor::full({2}, 5.0)));
  for (double v : tape.value(fives).values()) EXPECT_EQ(v, 5.0);
}

TEST(LayerNorm, ZeroMeanUnitVariancePerPosition) {
  CounterRng rng(9);
  Tape tape;
  Var x = tape.leaf(uniform_tensor(rng, {6, 2, 3}, -1, 1));
  const Tensor& y = tape.value(layer_norm(tape, x, tape.leaf(Tensor::full({6}, 1.0)),
                                          tape.leaf(Tensor({6})), 1e-12));
  for (std::size_t p = 0; p < 6; ++p) {
    double m = 0, v = 0;
    for (std::size_t c = 0; c < 6; ++c) m += y[c * 6 + p];
    for (std::size_t c = 0; c < 6; ++c) v += y[c * 6 + p] * y[c * 6 + p];
    EXPECT_NEAR(m / 6, 0.0, 1e-12);
    EXPECT_NEAR(v / 6, 1.0, 1e-9);
  }
}

TEST(LinearGeluSoftmax, Examples) {
  CounterRng rng(2);
  Tensor x = uniform_tensor(rng, {3, 2, 2}, -1, 1);
  Tape tape;
  Var y = linear(tape, tape.leaf(x), tape.leaf(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1})),
                 tape.leaf(Tensor({3})));
  expect_tensor_near(tape.value(y), x, 0.0);
  EXPECT_THROW(linear(tape, tape.leaf(x), tape.leaf(Tensor({2, 3})), Var{}), Error);
  EXPECT_THROW(linear(tape, tape.leaf(x), tape.leaf(Tensor({3, 3})), tape.leaf(Tensor({2}))),
               Error);

  EXPECT_EQ(tape.value(gelu(tape, tape.leaf(Tensor::from({0.0}))))[0], 0.0);
  // GELU(1) = Phi(1) = 0.8413447460685429...
  EXPECT_NEAR(tape.value(gelu(tape, tape.leaf(Tensor::from({1.0}))))[0], 0.8413447460685429,
              1e-15);

  expect_tensor_near(tape.value(softmax(tape, tape.leaf(Tensor::from({0, 0})), 0)),
                     Tensor::from({0.5, 0.5}), 0.0);
  const Tensor s = tape.value(softmax(tape, tape.leaf(uniform_tensor(rng, {3, 5}, -4, 4)), 1));
  for (std::size_t r = 0; r < 3; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) total += s[r * 5 + c];
    EXPECT_NEAR(total, 1.0, 1e-15);
  }
}

TEST(AvgPool, InteriorOfConstantAndZero) {
  Tape tape;
  const Tensor& y = tape.value(avg_pool3x3(tape, tape.leaf(Tensor::full({1, 3, 3}, 2.0))));
  EXPECT_DOUBLE_EQ(y.at({0, 1, 1}), 2.0);
  EXPECT_DOUBLE_EQ(y.at({0, 0, 0}), 2.0 * 4.0 / 9.0);
  for (double v : tape.value(avg_pool3x3(tape, tape.leaf(Tensor({2, 3, 3})))).values())
    EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, StridedShapeAndHandValue) {
  Tape tape;
  Var y = conv2d(tape, tape.leaf(Tensor::full({2, 8, 8}, 1.0)),
                 tape.leaf(Tensor::full({3, 2, 3, 3}, 1.0)), tape.leaf(Tensor({3})), 2, 1);
  const Tensor& out = tape.value(y);
  EXPECT_EQ(out.shape(), (Shape{3, 4, 4}));
  EXPECT_EQ(out.at({0, 0, 0}), 8.0);   // 2x2 window inside x 2 channels
  EXPECT_EQ(out.at({0, 1, 1}), 18.0);  // full 3x3 window x 2 channels
}

TEST(Backward, SquareAtThree) {
  Tape tape;
  Var x = tape.leaf(Tensor::scalar(3.0), true);
  Var y = mul(tape, x, x);
  tape.backward(y, Tensor::scalar(1.0));
  EXPECT_EQ(tape.grad(x)[0], 6.0);
}

TEST(Backward, UnusedParameterGetsZero) {
  Tape tape;
  Var a = tape.parameter("a", Tensor::scalar(2.0));
  tape.parameter("unused", Tensor({2, 2}));
  tape.backward(scale(tape, a, 3.0));
  const Gradients g = tape.parameter_gradients();
  EXPECT_EQ(g.at("a")[0], 3.0);
  EXPECT_EQ(g.at("unused").shape(), (Shape{2, 2}));
  for (double v : g.at("unused").values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, Errors) {
  Tape empty;
  EXPECT_THROW(empty.backward(Var{0}, Tensor::scalar(1)), Error);
  Tape tape;
  Var x = tape.leaf(Tensor({2}), true);
  Var y = scale(tape, x, 2.0);
  EXPECT_THROW(tape.backward(y, Tensor({3})), Error);
  Tape no_grad(false);
  Var z = no_grad.leaf(Tensor({1}), true);
  EXPECT_FALSE(no_grad.requires_grad(z));
  EXPECT_THROW(no_grad.backward(z), Error);
  tape.parameter("p", Tensor({1}));
  EXPECT_THROW(tape.parameter("p", Tensor({1})), Error);
}

TEST(Backward, SumOfLayerNormMatchesFiniteDifference) {
  CounterRng rng(4);
  Tensor x0 = uniform_tensor(rng, {5, 2, 2}, -1, 1);
  const auto f = [](const Tensor& x) {
    Tape t(false);
    return t.value(sum(t, layer_norm(t, t.leaf(x), t.leaf(Tensor::full({5}, 1.0)),
                                     t.leaf(Tensor({5}))))).item();
  };
  Tape tape;
  Var x = tape.leaf(x0, true);
  tape.backward(sum(tape, layer_norm(tape, x, tape.leaf(Tensor::full({5}, 1.0)),
                                     tape.leaf(Tensor({5})))));
  const Tensor fd = finite_diff_grad(f, x0);
  const Tensor an = tape.grad(x);
  for (std::size_t i = 0; i < an.size(); ++i)
    EXPECT_LT(std::abs(an[i] - fd[i]) / std::max(1.0, std::abs(an[i])), 1e-6);
}

TEST(FiniteDiff, Examples) {
  const Tensor g = finite_diff_grad(
      [](const Tensor& x) { return x[0] * x[0]; }, Tensor::scalar(3.0));
  EXPECT_NEAR(g[0], 6.0, 1e-8);
  const Tensor ones = finite_diff_grad(
      [](const Tensor& x) {
        double s = 0;
        for (double v : x.values()) s += v;
        return s;
      },
      Tensor({2, 3}));
  for (double v : ones.values()) EXPECT_NEAR(v, 1.0, 1e-9);
  EXPECT_THROW(finite_diff_grad([](const Tensor&) { return NAN; }, Tensor({1})), Error);
  EXPECT_THROW(finite_diff_grad([](const Tensor&) { return 0.0; }, Tensor({1}), 0.0), Error);
}

// Every primitive against central differences, 20 seeds, inputs in [-1, 1].
TEST(Gradcheck, PrimitivesOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CounterRng rng(1000 + seed);
    const auto u = [&](Shape s) { return uniform_tensor(rng, std::move(s), -1, 1); };
    EXPECT_LT(grad_error({u({3, 4})}, [](Tape& t, std::span<const Var> v) {
                return axis_mean(t, v[0], 1);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({2, 3, 4}), u({2, 4, 2})}, [](Tape& t, std::span<const Var> v) {
                return matmul(t, v[0], v[1]);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({2, 3, 4})}, [](Tape& t, std::span<const Var> v) {
                return permute(t, reshape(t, v[0], {4, 3, 2}), {2, 0, 1});
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({3, 4, 5}), u({3, 3, 3}), u({3})}, [](Tape& t, std::span<const Var> v) {
                return depthwise_conv3x3(t, v[0], v[1], v[2]);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({2, 7, 6}), u({3, 2, 3, 3}), u({3})}, [](Tape& t, std::span<const Var> v) {
                return conv2d(t, v[0], v[1], v[2], 2, 1);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({5, 2, 3}), u({5}), u({5})}, [](Tape& t, std::span<const Var> v) {
                return layer_norm(t, v[0], v[1], v[2]);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({3, 2, 2}), u({3, 4}), u({4})}, [](Tape& t, std::span<const Var> v) {
                return linear(t, v[0], v[1], v[2]);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({4, 3})}, [](Tape& t, std::span<const Var> v) {
                return gelu(t, v[0]);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({3, 4})}, [](Tape& t, std::span<const Var> v) {
                return softmax(t, v[0], 0);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({2, 4, 3})}, [](Tape& t, std::span<const Var> v) {
                return avg_pool3x3(t, v[0]);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({5})}, [seed](Tape& t, std::span<const Var> v) {
                return cross_entropy(t, v[0], seed % 5);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({u({3, 2}), u({3, 2})}, [](Tape& t, std::span<const Var> v) {
                return sub(t, mul(t, v[0], v[1]), scale(t, add(t, v[0], v[1]), 0.5));
              }, seed), 1e-4);
  }
}

TEST(Determinism, BitwiseIdenticalRuns) {
  const auto run = [] {
    CounterRng rng(77);
    Tensor x = uniform_tensor(rng, {4, 3, 3}, -1, 1);
    Tensor w = uniform_tensor(rng, {4, 3, 3}, -1, 1);
    Tape tape;
    Var xv = tape.leaf(x, true);
    Var y = gelu(tape, depthwise_conv3x3(tape, xv, tape.leaf(w), tape.leaf(Tensor({4}))));
    tape.backward(sum(tape, y));
    return std::pair{tape.value(y), tape.grad(xv)};
  };
  EXPECT_EQ(run(), run());
}

TEST(Precision, F32TapeRoundsValues) {
  Tape tape(true, Precision::f32);
  Var x = tape.leaf(Tensor::scalar(0.1));
  EXPECT_EQ(tape.value(x)[0], static_cast<double>(0.1f));
  EXPECT_NE(tape.value(x)[0], 0.1);
}

TEST(Rng, CounterStreamIsReproducibleAndForkable) {
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  CounterRng c(42, 50);
  CounterRng d(42);
  for (int i = 0; i < 50; ++i) d.next_u64();
  EXPECT_EQ(c.next_u64(), d.next_u64());
  EXPECT_NE(CounterRng(42).fork(1).next_u64(), CounterRng(42).fork(2).next_u64());
  for (int i = 0; i < 1000; ++i) {
    const double t = a.truncated_normal(0.02);
    EXPECT_LE(std::abs(t), 0.04);
    EXPECT_LT(a.below(7), 7u);
  }
}
