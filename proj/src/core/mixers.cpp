// SPDX-License-Identifier: Apache-2.0
#include "potter/mixers.hpp"

#include <cmath>

#include "potter/error.hpp"
#include "potter/ops.hpp"

namespace potter {

Factorization default_factorization(std::size_t dim) {
  if (dim == 0) fail(ErrorCode::invalid_argument, "embedding dimension must be positive");
  std::size_t rows = static_cast<std::size_t>(std::sqrt(static_cast<double>(dim)));
  while (rows * rows > dim) --rows;
  while ((rows + 1) * (rows + 1) <= dim) ++rows;
  while (dim % rows != 0) --rows;
  return {rows, dim / rows};
}

const char* to_string(MixerKind kind) {
  switch (kind) {
    case MixerKind::poolattn: return "poolattn";
    case MixerKind::pooling: return "pooling";
    case MixerKind::attention: return "attention";
  }
  return "?";
}

MixerKind parse_mixer_kind(const std::string& name) {
  if (name == "poolattn") return MixerKind::poolattn;
  if (name == "pooling") return MixerKind::pooling;
  if (name == "attention") return MixerKind::attention;
  fail(ErrorCode::invalid_argument,
       "unknown mixer '" + name + "' (expected poolattn, pooling or attention)");
}

Var patchwise_pool_attention(Tape& tape, Var x0) {
  const Shape& s = tape.value(x0).shape();
  if (s.size() != 3)
    fail(ErrorCode::shape_mismatch, "patch-wise attention expects [D,h,w], got " + shape_str(s));
  const Var along_h = axis_mean(tape, x0, 2);  // [D,h,1]
  const Var along_w = axis_mean(tape, x0, 1);  // [D,1,w]
  return matmul(tape, along_h, along_w);
}

Var embedwise_pool_attention(Tape& tape, Var x0, Factorization embed) {
  const Shape s = tape.value(x0).shape();
  if (s.size() != 3)
    fail(ErrorCode::shape_mismatch, "embed-wise attention expects [D,h,w], got " + shape_str(s));
  const std::size_t d = s[0], n = s[1] * s[2];
  if (embed.rows * embed.cols != d)
    fail(ErrorCode::shape_mismatch, "embedding factorization " + std::to_string(embed.rows) +
                                        "x" + std::to_string(embed.cols) + " does not equal D=" +
                                        std::to_string(d));
  Var patches = permute(tape, reshape(tape, x0, {d, n}), {1, 0});  // [N,D]
  patches = reshape(tape, patches, {n, embed.rows, embed.cols});
  const Var row_means = axis_mean(tape, patches, 2);  // [N,Dh,1]
  const Var col_means = axis_mean(tape, patches, 1);  // [N,1,Dw]
  Var x2 = matmul(tape, row_means, col_means);        // [N,Dh,Dw]
  x2 = permute(tape, reshape(tape, x2, {n, d}), {1, 0});
  return reshape(tape, x2, s);
}

Var poolattn(Tape& tape, Var x0, const PoolAttnVars& p) {
  const Var x1 = patchwise_pool_attention(tape, x0);
  const Var x3 = embedwise_pool_attention(tape, x0, p.embed);
  const Var fused = add(tape, depthwise_conv3x3(tape, x1, p.proj1.weight, p.proj1.bias),
                        depthwise_conv3x3(tape, x3, p.proj2.weight, p.proj2.bias));
  return depthwise_conv3x3(tape, fused, p.proj3.weight, p.proj3.bias);
}

Var pooling_mixer(Tape& tape, Var x) { return sub(tape, avg_pool3x3(tape, x), x); }

Var attention_mixer(Tape& tape, Var x, const AttentionVars& p) {
  const Shape s = tape.value(x).shape();
  if (s.size() != 3)
    fail(ErrorCode::shape_mismatch, "attention expects [D,h,w], got " + shape_str(s));
  const std::size_t d = s[0], n = s[1] * s[2];
  const Var tokens = reshape(tape, x, {d, n});
  const Var q = linear(tape, tokens, p.query.weight, p.query.bias);
  const Var k = linear(tape, tokens, p.key.weight, p.key.bias);
  const Var v = linear(tape, tokens, p.value.weight, p.value.bias);
  Var logits = matmul(tape, permute(tape, q, {1, 0}), k);  // [N,N]
  logits = scale(tape, logits, 1.0 / std::sqrt(static_cast<double>(d)));
  const Var weights = softmax(tape, logits, 1);
  const Var mixed = matmul(tape, v, permute(tape, weights, {1, 0}));  // [D,N]
  return reshape(tape, linear(tape, mixed, p.out.weight, p.out.bias), s);
}

Var pat_block(Tape& tape, Var x, const PatBlockVars& p) {
  const Var normed = layer_norm(tape, x, p.ln1.gamma, p.ln1.beta);
  Var mixed;
  switch (p.kind) {
    case MixerKind::poolattn: mixed = poolattn(tape, normed, p.poolattn); break;
    case MixerKind::pooling: mixed = pooling_mixer(tape, normed); break;
    case MixerKind::attention: mixed = attention_mixer(tape, normed, p.attention); break;
  }
  const Var attn = add(tape, mixed, x);
  Var hidden = linear(tape, layer_norm(tape, attn, p.ln2.gamma, p.ln2.beta), p.mlp1.weight,
                      p.mlp1.bias);
  hidden = linear(tape, gelu(tape, hidden), p.mlp2.weight, p.mlp2.bias);
  return add(tape, hidden, attn);
}

void linear_layout(ParamLayout& layout, const std::string& prefix, std::size_t in,
                   std::size_t out) {
  layout.push_back({prefix + ".weight", {in, out}});
  layout.push_back({prefix + ".bias", {out}});
}

LinearVars bind_linear(const Binding& b, const std::string& prefix) {
  return {b[prefix + ".weight"], b[prefix + ".bias"]};
}

void layer_norm_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim) {
  layout.push_back({prefix + ".gamma", {dim}});
  layout.push_back({prefix + ".beta", {dim}});
}

LayerNormVars bind_layer_norm(const Binding& b, const std::string& prefix) {
  return {b[prefix + ".gamma"], b[prefix + ".beta"]};
}

void poolattn_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim) {
  for (const char* proj : {".proj1", ".proj2", ".proj3"}) {
    layout.push_back({prefix + proj + ".weight", {dim, 3, 3}});
    layout.push_back({prefix + proj + ".bias", {dim}});
  }
}

PoolAttnVars bind_poolattn(const Binding& b, const std::string& prefix, Factorization embed) {
  const auto dw = [&](const char* proj) {
    return DepthwiseVars{b[prefix + proj + ".weight"], b[prefix + proj + ".bias"]};
  };
  PoolAttnVars p;
  p.proj1 = dw(".proj1");
  p.proj2 = dw(".proj2");
  p.proj3 = dw(".proj3");
  p.embed = embed;
  return p;
}

void attention_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim) {
  for (const char* part : {".query", ".key", ".value", ".out"})
    linear_layout(layout, prefix + part, dim, dim);
}

AttentionVars bind_attention(const Binding& b, const std::string& prefix) {
  return {bind_linear(b, prefix + ".query"), bind_linear(b, prefix + ".key"),
          bind_linear(b, prefix + ".value"), bind_linear(b, prefix + ".out")};
}

void pat_block_layout(ParamLayout& layout, const std::string& prefix, std::size_t dim,
                      MixerKind kind) {
  layer_norm_layout(layout, prefix + ".ln1", dim);
  if (kind == MixerKind::poolattn) poolattn_layout(layout, prefix + ".mixer", dim);
  if (kind == MixerKind::attention) attention_layout(layout, prefix + ".mixer", dim);
  layer_norm_layout(layout, prefix + ".ln2", dim);
  linear_layout(layout, prefix + ".mlp1", dim, 4 * dim);
  linear_layout(layout, prefix + ".mlp2", 4 * dim, dim);
}

PatBlockVars bind_pat_block(const Binding& b, const std::string& prefix, MixerKind kind,
                            Factorization embed) {
  PatBlockVars p;
  p.kind = kind;
  p.ln1 = bind_layer_norm(b, prefix + ".ln1");
  if (kind == MixerKind::poolattn) p.poolattn = bind_poolattn(b, prefix + ".mixer", embed);
  if (kind == MixerKind::attention) p.attention = bind_attention(b, prefix + ".mixer");
  p.ln2 = bind_layer_norm(b, prefix + ".ln2");
  p.mlp1 = bind_linear(b, prefix + ".mlp1");
  p.mlp2 = bind_linear(b, prefix + ".mlp2");
  return p;
}

}  // namespace potter
