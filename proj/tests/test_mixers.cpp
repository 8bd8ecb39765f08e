// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "potter/error.hpp"
#include "potter/mixers.hpp"
#include "potter/ops.hpp"
#include "potter/rng.hpp"
#include "test_util.hpp"

using namespace potter;
using potter::testing::expect_tensor_near;
using potter::testing::grad_error;

namespace {

Tensor center_kernel(std::size_t d) {
  Tensor w({d, 3, 3});
  for (std::size_t c = 0; c < d; ++c) w.at({c, 1, 1}) = 1.0;
  return w;
}

PoolAttnVars identity_poolattn(Tape& tape, std::size_t d, Factorization f) {
  PoolAttnVars p;
  for (DepthwiseVars* proj : {&p.proj1, &p.proj2, &p.proj3})
    *proj = {tape.leaf(center_kernel(d)), tape.leaf(Tensor({d}))};
  p.embed = f;
  return p;
}

}  // namespace

TEST(Factorization, ClosestToSquare) {
  EXPECT_EQ(default_factorization(64), (Factorization{8, 8}));
  EXPECT_EQ(default_factorization(128), (Factorization{8, 16}));
  EXPECT_EQ(default_factorization(320), (Factorization{16, 20}));
  EXPECT_EQ(default_factorization(512), (Factorization{16, 32}));
  EXPECT_EQ(default_factorization(12), (Factorization{3, 4}));
  EXPECT_EQ(default_factorization(7), (Factorization{1, 7}));
  EXPECT_EQ(default_factorization(1), (Factorization{1, 1}));
  EXPECT_THROW(default_factorization(0), Error);
}

TEST(PatchwisePoolAttention, Examples) {
  Tape tape;
  expect_tensor_near(
      tape.value(patchwise_pool_attention(tape, tape.leaf(Tensor({1, 2, 2}, {1, 2, 3, 4})))),
      Tensor({1, 2, 2}, {3, 4.5, 7, 10.5}), 0.0);
  const Tensor& c = tape.value(patchwise_pool_attention(tape, tape.leaf(Tensor::full({2, 3, 4}, -1.5))));
  for (double v : c.values()) EXPECT_DOUBLE_EQ(v, 2.25);
  for (double v : tape.value(patchwise_pool_attention(tape, tape.leaf(Tensor({2, 3, 3})))).values())
    EXPECT_EQ(v, 0.0);
}

TEST(EmbedwisePoolAttention, Examples) {
  Tape tape;
  expect_tensor_near(tape.value(embedwise_pool_attention(
                         tape, tape.leaf(Tensor({4, 1, 1}, {1, 2, 3, 4})), {2, 2})),
                     Tensor({4, 1, 1}, {3, 4.5, 7, 10.5}), 0.0);
  const Tensor& c = tape.value(
      embedwise_pool_attention(tape, tape.leaf(Tensor::full({6, 2, 2}, 3.0)), {2, 3}));
  for (double v : c.values()) EXPECT_DOUBLE_EQ(v, 9.0);
  EXPECT_THROW(embedwise_pool_attention(tape, tape.leaf(Tensor({6, 2, 2})), {2, 2}), Error);
}

TEST(EmbedwisePoolAttention, PatchesAreIndependent) {
  CounterRng rng(8);
  Tensor two = uniform_tensor(rng, {6, 1, 2}, -1, 1);
  Tape tape;
  const Tensor both = tape.value(embedwise_pool_attention(tape, tape.leaf(two), {2, 3}));
  for (std::size_t patch = 0; patch < 2; ++patch) {
    Tensor single({6, 1, 1});
    for (std::size_t c = 0; c < 6; ++c) single[c] = two[c * 2 + patch];
    const Tensor alone = tape.value(embedwise_pool_attention(tape, tape.leaf(single), {2, 3}));
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(both[c * 2 + patch], alone[c]);
  }
}

TEST(PoolAttention, MatchesBruteForceOracle) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    CounterRng rng(seed);
    const std::size_t rows = 1 + rng.below(3), cols = 1 + rng.below(4);
    const Tensor x = uniform_tensor(rng, {rows * cols, 1 + rng.below(5), 1 + rng.below(5)}, -1, 1);
    Tape tape;
    Var xv = tape.leaf(x);
    expect_tensor_near(tape.value(patchwise_pool_attention(tape, xv)), oracle::patchwise(x), 1e-12);
    expect_tensor_near(tape.value(embedwise_pool_attention(tape, xv, {rows, cols})),
                       oracle::embedwise(x, rows, cols), 1e-12);
  }
}

TEST(PoolAttention, AttentionMapsHaveRankOne) {
  CounterRng rng(21);
  const Tensor x = uniform_tensor(rng, {6, 4, 5}, -1, 1);
  Tape tape;
  const Tensor x1 = tape.value(patchwise_pool_attention(tape, tape.leaf(x)));
  for (std::size_t c = 0; c < 6; ++c) EXPECT_LT(oracle::rank1_defect(x1.data() + c * 20, 4, 5), 1e-15);
  const Tensor x3 = tape.value(embedwise_pool_attention(tape, tape.leaf(x), {2, 3}));
  for (std::size_t n = 0; n < 20; ++n) {
    double m[6];
    for (std::size_t c = 0; c < 6; ++c) m[c] = x3[c * 20 + n];
    EXPECT_LT(oracle::rank1_defect(m, 2, 3), 1e-15);
  }
}

TEST(PoolAttention, ChannelPermutationEquivariance) {
  CounterRng rng(5);
  const Tensor x = uniform_tensor(rng, {4, 3, 3}, -1, 1);
  const std::size_t perm[4] = {3, 1, 0, 2};
  Tensor px(x.shape());
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 9; ++i) px[c * 9 + i] = x[perm[c] * 9 + i];
  Tape tape;
  const Tensor y = tape.value(patchwise_pool_attention(tape, tape.leaf(x)));
  const Tensor py = tape.value(patchwise_pool_attention(tape, tape.leaf(px)));
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(py[c * 9 + i], y[perm[c] * 9 + i]);
}

TEST(PoolAttn, IdentityProjectionsSumBranches) {
  Tape tape;
  Var x = tape.leaf(Tensor({1, 2, 2}, {1, 2, 3, 4}));
  expect_tensor_near(tape.value(poolattn(tape, x, identity_poolattn(tape, 1, {1, 1}))),
                     Tensor({1, 2, 2}, {4, 8.5, 16, 26.5}), 1e-15);
}

TEST(PoolAttn, ZeroInputAndZeroProjection) {
  Tape tape;
  PoolAttnVars p = identity_poolattn(tape, 2, {1, 2});
  for (double v : tape.value(poolattn(tape, tape.leaf(Tensor({2, 3, 3})), p)).values())
    EXPECT_EQ(v, 0.0);
  p.proj3 = {tape.leaf(Tensor({2, 3, 3})), tape.leaf(Tensor::from({1.25, -0.5}))};
  CounterRng rng(1);
  const Tensor& y = tape.value(poolattn(tape, tape.leaf(uniform_tensor(rng, {2, 3, 3}, -1, 1)), p));
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(y[i], 1.25);
    EXPECT_EQ(y[9 + i], -0.5);
  }
  EXPECT_THROW(poolattn(tape, tape.leaf(Tensor({3, 3, 3})), p), Error);
}

TEST(PoolingMixer, Examples) {
  Tape tape;
  const Tensor& y = tape.value(pooling_mixer(tape, tape.leaf(Tensor::full({1, 3, 3}, 2.0))));
  EXPECT_EQ(y.at({0, 1, 1}), 0.0);
  EXPECT_NE(y.at({0, 0, 0}), 0.0);
  for (double v : tape.value(pooling_mixer(tape, tape.leaf(Tensor({2, 3, 3})))).values())
    EXPECT_EQ(v, 0.0);
  ParamLayout layout;
  pat_block_layout(layout, "b", 8, MixerKind::pooling);
  EXPECT_EQ(initialize(layout, 0).numel_under("b.mixer"), 0u);
}

TEST(AttentionMixer, ZeroQueryKeyGivesUniformAverage) {
  CounterRng rng(3);
  const std::size_t d = 3;
  const Tensor x = uniform_tensor(rng, {d, 2, 2}, -1, 1);
  const Tensor wv = uniform_tensor(rng, {d, d}, -1, 1), bv = uniform_tensor(rng, {d}, -1, 1);
  const Tensor wo = uniform_tensor(rng, {d, d}, -1, 1), bo = uniform_tensor(rng, {d}, -1, 1);
  Tape tape;
  AttentionVars p{{tape.leaf(Tensor({d, d})), tape.leaf(uniform_tensor(rng, {d}, -1, 1))},
                  {tape.leaf(Tensor({d, d})), tape.leaf(uniform_tensor(rng, {d}, -1, 1))},
                  {tape.leaf(wv), tape.leaf(bv)},
                  {tape.leaf(wo), tape.leaf(bo)}};
  const Tensor y = tape.value(attention_mixer(tape, tape.leaf(x), p));
  // Uniform weights: every token becomes Wo^T (Wv^T mean(x) + bv) + bo.
  double mean[d] = {0, 0, 0};
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t n = 0; n < 4; ++n) mean[c] += x[c * 4 + n] / 4.0;
  double v[d], o[d];
  for (std::size_t e = 0; e < d; ++e) {
    v[e] = bv[e];
    for (std::size_t c = 0; c < d; ++c) v[e] += wv.at({c, e}) * mean[c];
  }
  for (std::size_t e = 0; e < d; ++e) {
    o[e] = bo[e];
    for (std::size_t c = 0; c < d; ++c) o[e] += wo.at({c, e}) * v[c];
  }
  for (std::size_t e = 0; e < d; ++e)
    for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(y[e * 4 + n], o[e], 1e-14);
}

TEST(AttentionMixer, SingleTokenIsValueThenOutput) {
  CounterRng rng(4);
  ParamLayout layout;
  attention_layout(layout, "a", 4);
  const ParamStore store = initialize(layout, 9);
  Tape tape;
  AttentionVars p = bind_attention(Binding(tape, store), "a");
  const Tensor x = uniform_tensor(rng, {4, 1, 1}, -1, 1);
  const Tensor direct = tape.value(linear(
      tape, linear(tape, tape.leaf(x), p.value.weight, p.value.bias), p.out.weight, p.out.bias));
  expect_tensor_near(tape.value(attention_mixer(tape, tape.leaf(x), p)), direct, 1e-15);
}

TEST(ParamCounts, ClosedFormsOfConstructedModules) {
  ParamLayout pa;
  poolattn_layout(pa, "pa", 512);
  EXPECT_EQ(initialize(pa, 0).numel(), 15360u);
  ParamLayout attn;
  attention_layout(attn, "at", 512);
  EXPECT_EQ(layout_numel(attn), 1050624u);
  for (std::size_t d : {1u, 4u, 64u}) {
    ParamLayout layout;
    pat_block_layout(layout, "b", d, MixerKind::poolattn);
    const ParamStore block = initialize(layout, 0);
    // 30D + 8D^2 weights plus 4D layer-norm and 5D MLP bias scalars.
    EXPECT_EQ(block.numel(), 30 * d + 8 * d * d + 9 * d);
    EXPECT_EQ(block.get("b.mlp1.weight").shape(), (Shape{d, 4 * d}));
  }
}

TEST(PatBlock, ShapePreservedForEveryMixer) {
  for (MixerKind kind : {MixerKind::poolattn, MixerKind::pooling, MixerKind::attention}) {
    ParamLayout layout;
    pat_block_layout(layout, "b", 8, kind);
    const ParamStore store = initialize(layout, 1);
    Tape tape;
    CounterRng rng(2);
    Var y = pat_block(tape, tape.leaf(uniform_tensor(rng, {8, 4, 4}, -1, 1)),
                      bind_pat_block(Binding(tape, store), "b", kind, default_factorization(8)));
    EXPECT_EQ(tape.value(y).shape(), (Shape{8, 4, 4})) << to_string(kind);
  }
}

TEST(PatBlock, ZeroBranchesAreIdentity) {
  // Pooling has no weights to zero, so only the weighted mixers qualify.
  for (MixerKind kind : {MixerKind::poolattn, MixerKind::attention}) {
    ParamLayout layout;
    pat_block_layout(layout, "b", 6, kind);
    ParamStore store = initialize(layout, 1);
    for (auto& [name, t] : store.entries())
      if (!name.ends_with("gamma")) std::fill(store.get(name).values().begin(),
                                               store.get(name).values().end(), 0.0);
    CounterRng rng(3);
    const Tensor x = uniform_tensor(rng, {6, 3, 2}, -1, 1);
    Tape tape;
    PatBlockVars p = bind_pat_block(Binding(tape, store), "b", kind, default_factorization(6));
    EXPECT_EQ(tape.value(pat_block(tape, tape.leaf(x), p)), x) << to_string(kind);
  }
}

TEST(PatBlock, GradcheckAllParametersAndInput) {
  for (MixerKind kind : {MixerKind::poolattn, MixerKind::pooling, MixerKind::attention}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const std::size_t d = 6;
      ParamLayout layout;
      pat_block_layout(layout, "b", d, kind);
      const ParamStore store = initialize(layout, seed);
      CounterRng rng(seed + 100);
      std::vector<Tensor> inputs{uniform_tensor(rng, {d, 1, 3}, -1, 1)};
      std::vector<std::string> names;
      for (const auto& [name, t] : store.entries()) {
        names.push_back(name);
        inputs.push_back(uniform_tensor(rng, t.shape(), -1, 1));
      }
      const auto build = [&](Tape& tape, std::span<const Var> v) {
        PatBlockVars p;
        p.kind = kind;
        std::size_t k = 1;
        const auto next = [&] { return v[k++]; };
        p.ln1 = {next(), next()};
        if (kind == MixerKind::poolattn)
          for (DepthwiseVars* proj : {&p.poolattn.proj1, &p.poolattn.proj2, &p.poolattn.proj3})
            *proj = {next(), next()};
        p.poolattn.embed = {2, 3};
        if (kind == MixerKind::attention)
          for (LinearVars* l : {&p.attention.query, &p.attention.key, &p.attention.value, &p.attention.out})
            *l = {next(), next()};
        p.ln2 = {next(), next()};
        p.mlp1 = {next(), next()};
        p.mlp2 = {next(), next()};
        return pat_block(tape, v[0], p);
      };
      EXPECT_LT(grad_error(inputs, build, seed), 1e-4) << to_string(kind) << " seed " << seed;
    }
  }
}

TEST(Mixers, GradcheckPoolAttentionBranches) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(seed);
    const Tensor x = uniform_tensor(rng, {6, 3, 4}, -1, 1);
    EXPECT_LT(grad_error({x}, [](Tape& t, std::span<const Var> v) {
                return patchwise_pool_attention(t, v[0]);
              }, seed), 1e-4);
    EXPECT_LT(grad_error({x}, [](Tape& t, std::span<const Var> v) {
                return embedwise_pool_attention(t, v[0], {2, 3});
              }, seed), 1e-4);
    EXPECT_LT(grad_error({x}, [](Tape& t, std::span<const Var> v) {
                return pooling_mixer(t, v[0]);
              }, seed), 1e-4);
  }
}
