// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "potter/params.hpp"
#include "potter/tape.hpp"

namespace potter {

/// D = rows * cols split of the embedding axis used by embed-wise attention.
/// Channel d sits at (d / cols, d % cols).
struct Factorization {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const Factorization&, const Factorization&) = default;
};

/// Closest-to-square factor pair with rows <= cols (64 -> 8x8, 320 -> 16x20).
Factorization default_factorization(std::size_t dim);

enum class MixerKind { poolattn, pooling, attention };

const char* to_string(MixerKind kind);
MixerKind parse_mixer_kind(const std::string& name);

struct DepthwiseVars {
  Var weight;  // [D,3,3]
  Var bias;    // [D]
};

struct LinearVars {
  Var weight;  // [in, out]
  Var bias;    // [out]
};

struct LayerNormVars {
  Var gamma;
  Var beta;
};

struct PoolAttnVars {
  DepthwiseVars proj1;
  DepthwiseVars proj2;
  DepthwiseVars proj3;
  Factorization embed;
};

struct AttentionVars {
  LinearVars query;
  LinearVars key;
  LinearVars value;
  LinearVars out;
};

struct PatBlockVars {
  MixerKind kind = MixerKind::poolattn;
  LayerNormVars ln1;
  LayerNormVars ln2;
  PoolAttnVars poolattn;    // kind == poolattn
  AttentionVars attention;  // kind == attention
  LinearVars mlp1;          // [D, 4D]
  LinearVars mlp2;          // [4D, D]
};

/// Per channel: (mean over w) x (mean over h), an h x w map of rank <= 1.
Var patchwise_pool_attention(Tape& tape, Var x0);

/// Per patch: the embedding vector viewed as rows x cols, replaced by the
/// outer product of its column means and row means.
Var embedwise_pool_attention(Tape& tape, Var x0, Factorization embed);

/// proj3(proj1(patch-wise) + proj2(embed-wise)); x0 is already normalized.
Var poolattn(Tape& tape, Var x0, const PoolAttnVars& p);

/// avgpool3x3(x) - x.
Var pooling_mixer(Tape& tape, Var x);

/// Single-head scaled dot-product attention over the h*w tokens.
Var attention_mixer(Tape& tape, Var x, const AttentionVars& p);

/// x + mixer(LN(x)), then + MLP(LN(.)) with a GELU hidden layer of width 4D.
Var pat_block(Tape& tape, Var x, const PatBlockVars& p);

// Parameter layout of one PAT block under `prefix`:
//   ln1.gamma ln1.beta  mixer.*  ln2.gamma ln2.beta  mlp1.weight mlp1.bias
//   mlp2.weight mlp2.bias
// with mixer.proj{1,2,3}.{weight,bias} for PoolAttn and
// mixer.{query,key,value,out}.{weight,bias} for attention.
void pat_block_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim,
                      MixerKind kind);
PatBlockVars bind_pat_block(const Binding& b, const std::string& prefix, MixerKind kind,
                            Factorization embed);

void poolattn_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim);
PoolAttnVars bind_poolattn(const Binding& b, const std::string& prefix, Factorization embed);
void attention_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim);
AttentionVars bind_attention(const Binding& b, const std::string& prefix);

void linear_layout(ParamLayout& layout, const std::string& prefix, std::size_t in,
                   std::size_t out);
LinearVars bind_linear(const Binding& b, const std::string& prefix);
void layer_norm_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim);
LayerNormVars bind_layer_norm(const Binding& b, const std::string& prefix);

}  // namespace potter
