// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

#include "potter/config.hpp"
#include "potter/params.hpp"
#include "potter/tape.hpp"

namespace potter {

/// image [3,H,W] -> [D1, H/p, W/p]. weight [3p^2, D1]; input channel of patch
/// pixel (c, a, b) is c*p*p + a*p + b.
Var patch_embed(Tape& tape, Var image, std::size_t patch, Var weight, Var bias);

/// [D,h,w] -> [E,h/2,w/2]. Each 2x2 block is concatenated to 4D channels,
/// offset (a,b) of channel c at index (2a+b)*D + c, then mapped by weight [4D,E].
Var patch_merge(Tape& tape, Var x, Var weight, Var bias);

/// [D,h,w] -> [D1, s*h, s*w]. weight [D, s*s*D1]; output channel c at offset
/// (a,b) of each s x s cell comes from linear channel c*s*s + a*s + b.
Var patch_split(Tape& tape, Var x, std::size_t s, Var weight, Var bias);

/// Spatial mean of [D,h,w], then weight [D,k] and bias [k]. Result [k].
Var classify_head(Tape& tape, Var x, Var weight, Var bias);

struct ModelOutputs {
  std::array<Var, 4> stages;
  Var hr;      // invalid unless hr_enabled
  Var output;  // logits, or the HR map / stage-4 map for a feature head
};

/// Parameter names:
///   embed.{weight,bias}
///   stage{i}.block{j}.*            i = 1..4, j = 1..n_i
///   merge{i}.{weight,bias}         between stage i and i+1
///   hr.split{i}.{weight,bias}      i = 2..4
///   hr.stage{i}.block{j}.*         i = 2..4, j = 1..m_i
///   norm.{gamma,beta}, head.{weight,bias}
///                                  classify head only: LN of stage 4, then
///                                  classify_head
class PotterModel {
 public:
  explicit PotterModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const ParamLayout& layout() const noexcept { return layout_; }
  ParamStore initialize(std::uint64_t seed) const;

  /// Throws Error(shape_mismatch) listing every missing, unexpected or
  /// mis-shaped tensor.
  void check_weights(const ParamStore& store) const;

  ModelOutputs forward(Tape& tape, const Binding& params, Var image) const;
  std::array<Var, 4> basic_stream(Tape& tape, const Binding& params, Var image) const;
  Var hr_stream(Tape& tape, const Binding& params, const std::array<Var, 4>& stages) const;

  /// Gradient-free forward of one image.
  Tensor infer(const ParamStore& params, const Tensor& image) const;

 private:
  ModelConfig config_;
  ParamLayout layout_;
};

/// J = W_reg M for mesh [Nv,3] and regressor [k,Nv].
Tensor regress_joints(const Tensor& mesh, const Tensor& regressor);

struct HmrTargets {
  Tensor beta;
  Tensor theta;
  Tensor joints;
};

struct HmrWeights {
  double beta = 0.01;
  double theta = 0.01;
  double joints = 1.0;
};

/// Weighted sum of squared residuals of shape, pose and joints.
double hmr_loss(const HmrTargets& pred, const HmrTargets& gt, HmrWeights w = {});

struct HmrVars {
  Var beta;
  Var theta;
  Var joints;
};
Var hmr_loss(Tape& tape, const HmrVars& pred, const HmrVars& gt, HmrWeights w = {});

}  // namespace potter
