// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "json.hpp"
#include "potter/backbone.hpp"
#include "potter/error.hpp"
#include "potter/profiler.hpp"
#include "potter/rng.hpp"

using namespace potter;

namespace {

std::uint64_t block_layout_numel(MixerKind kind, std::size_t d) {
  ParamLayout layout;
  pat_block_layout(layout, "b", d, kind);
  return layout_numel(layout);
}

ModelConfig random_config(CounterRng& rng) {
  ModelConfig c;
  c.input_h = 32 * (1 + rng.below(3));
  c.input_w = 32 * (1 + rng.below(3));
  for (auto& d : c.dims) d = 1 + rng.below(24);
  for (auto& n : c.depths) n = rng.below(3);
  for (auto& m : c.hr_depths) m = rng.below(3);
  c.hr_enabled = rng.below(2) == 1;
  c.mixer = static_cast<MixerKind>(rng.below(3));
  c.embed = rng.below(2) ? EmbedKind::patchify : EmbedKind::overlap7;
  c.merge = rng.below(2) ? MergeKind::linear2x2 : MergeKind::conv3x3;
  c.head = rng.below(2) ? HeadKind::classify : HeadKind::features;
  c.classes = c.head == HeadKind::classify ? 1 + rng.below(10) : 0;
  return c;
}

}  // namespace

TEST(ClosedForm, PatBlock) {
  EXPECT_EQ(closed_form_pat(1, 1), (Counts{38, 35}));
  EXPECT_EQ(closed_form_pat(512, 196), (Counts{2112512, 413751296}));
}

TEST(ClosedForm, Attention) {
  EXPECT_EQ(closed_form_attention(1, 1), (Counts{8, 6}));
  EXPECT_EQ(closed_form_attention(512, 196), (Counts{1050624, 181436416}));
  const double ratio = double(closed_form_poolattn(512, 196).params) /
                       double(closed_form_attention(512, 196).params);
  EXPECT_NEAR(ratio, 0.0146, 5e-5);
}

TEST(ProfileMixer, HeadlineNumbers) {
  const ComplexityReport poolattn = profile_mixer(MixerKind::poolattn, 512, 196, CountMode::table);
  EXPECT_EQ(poolattn.total_params, 15360u);
  EXPECT_EQ(poolattn.total_macs, 2709504u);
  EXPECT_EQ(profile_mixer(MixerKind::poolattn, 512, 256, CountMode::table).total_macs, 3538944u);
  const ComplexityReport attn = profile_mixer(MixerKind::attention, 512, 196, CountMode::table);
  EXPECT_EQ(attn.total_params, 1050624u);
  EXPECT_EQ(attn.total_macs, 181436416u);
  ASSERT_TRUE(attn.closed_form);
  EXPECT_EQ(attn.closed_form->macs, 181436416u);
  EXPECT_EQ(profile_mixer(MixerKind::pooling, 512, 196, CountMode::table).total_params, 0u);
  EXPECT_EQ(profile_mixer(MixerKind::pooling, 512, 196, CountMode::exact).total_params, 0u);
}

TEST(ProfileMixer, ExactModeCountsTheRealComputation) {
  // Attention as implemented: four D x D projections per token, then D*N^2
  // for the logits and D*N^2 for the weighted sum.
  EXPECT_EQ(profile_mixer(MixerKind::attention, 512, 196, CountMode::exact).total_macs,
            4ull * 512 * 512 * 196 + 2ull * 512 * 196 * 196);
  // PoolAttn: 27DN projections plus, per branch, 2DN mean accumulations and
  // DN for the outer product.
  EXPECT_EQ(profile_mixer(MixerKind::poolattn, 8, 10, CountMode::exact).total_macs, 33u * 80);
  EXPECT_EQ(profile_mixer(MixerKind::pooling, 8, 10, CountMode::exact).total_macs, 9u * 80);
}

TEST(ProfilePatBlock, FeedForwardAtHeadlineSize) {
  const ComplexityReport r = profile_pat_block(MixerKind::poolattn, 512, 196, CountMode::table);
  std::uint64_t ffn = 0;
  for (const LayerRecord& rec : r.records)
    if (rec.name.ends_with("mlp1") || rec.name.ends_with("mlp2")) ffn += rec.macs;
  EXPECT_EQ(ffn, 411041792u);
}

TEST(ProfilePatBlock, TableModeMatchesFormulaAndConstructedBlock) {
  CounterRng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint64_t d = 1 + rng.below(600), n = 1 + rng.below(4000);
    const ComplexityReport table = profile_pat_block(MixerKind::poolattn, d, n, CountMode::table);
    EXPECT_EQ((Counts{table.total_params, table.total_macs}), closed_form_pat(d, n));
    ASSERT_TRUE(table.closed_form);
    EXPECT_EQ(table.closed_form->params, table.total_params);
    // The stored block minus both layer norms (4D) and the MLP biases (5D).
    EXPECT_EQ(block_layout_numel(MixerKind::poolattn, d) - 9 * d, table.total_params);
  }
}

TEST(ProfilePatBlock, ExactParamsEqualStoredScalars) {
  for (MixerKind kind : {MixerKind::poolattn, MixerKind::pooling, MixerKind::attention})
    for (std::uint64_t d : {1, 7, 64})
      EXPECT_EQ(profile_pat_block(kind, d, 5, CountMode::exact).total_params,
                block_layout_numel(kind, d));
}

TEST(CountModel, ExactParamsEqualLayoutForRandomConfigs) {
  CounterRng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const ModelConfig c = random_config(rng);
    EXPECT_EQ(count_params(c, CountMode::exact).total_params,
              layout_numel(PotterModel(c).layout()))
        << config_to_json(c);
  }
}

TEST(CountModel, HandCountedPipelineWithoutBlocks) {
  ModelConfig c = preset("micro");
  c.depths = {0, 0, 0, 0};
  // 32x32 input: grids 8x8, 4x4, 2x2, 1x1; dims 4, 8, 12, 16; 4 classes.
  const std::uint64_t params = (48 * 4 + 4) + (16 * 8 + 8) + (32 * 12 + 12) + (48 * 16 + 16) +
                               (16 * 4 + 4);
  const std::uint64_t macs = 48 * 4 * 64 + 16 * 8 * 16 + 32 * 12 * 4 + 48 * 16 * 1 + 16 * 4;
  const ComplexityReport table = count_params(c, CountMode::table);
  EXPECT_EQ(table.total_params, params);
  EXPECT_EQ(table.total_macs, macs);
  // Exact adds the final layer norm (2D params, 2DN) and the head's spatial mean.
  const ComplexityReport exact = count_params(c, CountMode::exact);
  EXPECT_EQ(exact.total_params, params + 32);
  EXPECT_EQ(exact.total_macs, macs + 32 + 16);
}

TEST(CountModel, TotalsAreSumsAndParamsIgnoreInputSize) {
  const ModelConfig c = preset("potter_hmr");
  const ComplexityReport a = count_macs(c, 256, 256, CountMode::exact);
  const ComplexityReport b = count_macs(c, 128, 192, CountMode::exact);
  EXPECT_EQ(a.total_params, b.total_params);
  EXPECT_NE(a.total_macs, b.total_macs);
  std::uint64_t p = 0, m = 0;
  for (const LayerRecord& rec : a.records) {
    p += rec.params;
    m += rec.macs;
  }
  EXPECT_EQ(p, a.total_params);
  EXPECT_EQ(m, a.total_macs);
}

TEST(CountModel, MacsScaleLinearlyWithBatch) {
  for (const char* name : {"cls_s12", "micro_hr"}) {
    const ModelConfig c = preset(name);
    const ComplexityReport one = count_macs(c, c.input_h, c.input_w, CountMode::exact, 1);
    const ComplexityReport five = count_macs(c, c.input_h, c.input_w, CountMode::exact, 5);
    EXPECT_EQ(five.total_macs, 5 * one.total_macs);
    EXPECT_EQ(five.total_params, one.total_params);
  }
}

TEST(CountModel, RejectsInvalidInputs) {
  EXPECT_THROW(count_macs(preset("micro"), 48, 32, CountMode::exact), Error);
  EXPECT_THROW(count_macs(preset("micro"), 32, 32, CountMode::exact, 0), Error);
  EXPECT_THROW(profile_mixer(MixerKind::poolattn, 0, 4, CountMode::table), Error);
  EXPECT_THROW(parse_count_mode("approx"), Error);
}

TEST(CountModel, MixerAblationDeltaIsThirtyDPerBlock) {
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig c = random_config(rng);
    c.mixer = MixerKind::poolattn;
    const std::uint64_t with = count_params(c, CountMode::exact).total_params;
    c.mixer = MixerKind::pooling;
    const std::uint64_t without = count_params(c, CountMode::exact).total_params;
    std::uint64_t expected = 0;
    for (std::size_t i = 0; i < 4; ++i) expected += 30 * c.depths[i] * c.dims[i];
    if (c.hr_enabled)
      for (std::size_t m : c.hr_depths) expected += 30 * m * c.dims[0];
    EXPECT_EQ(with - without, expected);
  }
}

TEST(ScalingAudit, PoolAttnIsLinearAndAttentionTendsToQuadratic) {
  const ScalingAudit pa = scaling_audit(MixerKind::poolattn, 512, {196, 392, 784});
  EXPECT_EQ(pa.rows[1].macs, 2 * pa.rows[0].macs);
  EXPECT_DOUBLE_EQ(pa.rows[1].local_exponent, 1.0);
  EXPECT_NEAR(pa.fitted_exponent, 1.0, 1e-12);

  const ScalingAudit at = scaling_audit(MixerKind::attention, 512, {196, 392});
  EXPECT_EQ(at.rows[0].macs, 181436416u);
  EXPECT_EQ(at.rows[1].macs, 4ull * 512 * 392 * 392 + 2ull * 512 * 512 * 392);
  const std::uint64_t logits_196 = 2ull * 512 * 196 * 196, logits_392 = 2ull * 512 * 392 * 392;
  EXPECT_EQ(logits_392, 4 * logits_196);

  const ScalingAudit large = scaling_audit(MixerKind::attention, 64, {10000, 100000, 1000000});
  EXPECT_GT(large.fitted_exponent, 1.99);
  EXPECT_LT(large.fitted_exponent, 2.0);
  EXPECT_THROW(scaling_audit(MixerKind::poolattn, 8, {4, 4}), Error);
}

TEST(ScalingAudit, TimedRowsCarryWallTime) {
  const ScalingAudit a = scaling_audit(MixerKind::attention, 8, {16, 32}, CountMode::exact, true);
  for (const ScalingRow& row : a.rows) EXPECT_GE(row.wall_ms, 0.0);
  EXPECT_NE(audit_to_text(a).find("fitted exponent"), std::string::npos);
  EXPECT_EQ(nlohmann::json::parse(audit_to_json(a))["rows"].size(), 2u);
}

TEST(Report, JsonAndTextRendering) {
  const ComplexityReport r = count_params(preset("micro_hr"), CountMode::exact);
  const auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(j["totals"]["params"].get<std::uint64_t>(), r.total_params);
  EXPECT_EQ(j["records"].size(), r.records.size());
  EXPECT_EQ(j["mode"], "exact");
  const std::string text = report_to_text(r);
  EXPECT_NE(text.find("hr.split4"), std::string::npos);
  EXPECT_NE(text.find("total"), std::string::npos);
  const auto attn =
      nlohmann::json::parse(report_to_json(profile_mixer(MixerKind::attention, 512, 196,
                                                         CountMode::table)));
  EXPECT_EQ(attn["closed_form"]["macs_formula"], "4DN^2+2D^2N");
}
