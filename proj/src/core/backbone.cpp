// SPDX-License-Identifier: Apache-2.0
#include "potter/backbone.hpp"

#include <set>

#include "potter/error.hpp"
#include "potter/mixers.hpp"
#include "potter/ops.hpp"

namespace potter {

namespace {

Shape shape_of(Tape& tape, Var v) { return tape.value(v).shape(); }

std::string stage_prefix(std::size_t stage, std::size_t block) {
  return "stage" + std::to_string(stage) + ".block" + std::to_string(block);
}

std::string hr_prefix(std::size_t stage, std::size_t block) {
  return "hr.stage" + std::to_string(stage) + ".block" + std::to_string(block);
}

}  // namespace

Var patch_embed(Tape& tape, Var image, std::size_t p, Var weight, Var bias) {
  const Shape s = shape_of(tape, image);
  if (s.size() != 3 || s[0] != 3)
    fail(ErrorCode::shape_mismatch, "patch_embed expects an image [3,H,W], got " + shape_str(s));
  if (p == 0 || s[1] % p || s[2] % p)
    fail(ErrorCode::shape_mismatch, "patch_embed: image " + shape_str(s) +
                                        " is not divisible into " + std::to_string(p) + "x" +
                                        std::to_string(p) + " patches");
  const std::size_t gh = s[1] / p, gw = s[2] / p;
  Var x = reshape(tape, image, {3, gh, p, gw, p});
  x = permute(tape, x, {0, 2, 4, 1, 3});
  x = reshape(tape, x, {3 * p * p, gh, gw});
  return linear(tape, x, weight, bias);
}

Var patch_merge(Tape& tape, Var x, Var weight, Var bias) {
  const Shape s = shape_of(tape, x);
  if (s.size() != 3)
    fail(ErrorCode::shape_mismatch, "patch_merge expects [D,h,w], got " + shape_str(s));
  if (s[1] % 2 || s[2] % 2)
    fail(ErrorCode::shape_mismatch, "patch_merge needs even extents, got " + shape_str(s));
  const std::size_t d = s[0], h2 = s[1] / 2, w2 = s[2] / 2;
  Var y = reshape(tape, x, {d, h2, 2, w2, 2});
  y = permute(tape, y, {2, 4, 0, 1, 3});
  y = reshape(tape, y, {4 * d, h2, w2});
  return linear(tape, y, weight, bias);
}

Var patch_split(Tape& tape, Var x, std::size_t s, Var weight, Var bias) {
  const Shape xs = shape_of(tape, x);
  if (xs.size() != 3)
    fail(ErrorCode::shape_mismatch, "patch_split expects [D,h,w], got " + shape_str(xs));
  if (s == 0) fail(ErrorCode::invalid_argument, "patch_split factor must be positive");
  const Shape ws = shape_of(tape, weight);
  if (ws.size() != 2 || ws[1] % (s * s))
    fail(ErrorCode::shape_mismatch, "patch_split: weight " + shape_str(ws) +
                                        " output width is not a multiple of s*s=" +
                                        std::to_string(s * s));
  const std::size_t d1 = ws[1] / (s * s), h = xs[1], w = xs[2];
  Var y = linear(tape, x, weight, bias);
  y = reshape(tape, y, {d1, s, s, h, w});
  y = permute(tape, y, {0, 3, 1, 4, 2});
  return reshape(tape, y, {d1, h * s, w * s});
}

Var classify_head(Tape& tape, Var x, Var weight, Var bias) {
  const Shape s = shape_of(tape, x);
  if (s.size() != 3)
    fail(ErrorCode::shape_mismatch, "classify_head expects [D,h,w], got " + shape_str(s));
  Var pooled = axis_mean(tape, reshape(tape, x, {s[0], s[1] * s[2]}), 1);  // [D,1]
  Var logits = linear(tape, pooled, weight, bias);
  return reshape(tape, logits, {shape_of(tape, logits)[0]});
}

PotterModel::PotterModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const ModelConfig& c = config_;
  const std::size_t p = c.patch_size;
  if (c.embed == EmbedKind::patchify) {
    layout_.push_back({"embed.weight", {3 * p * p, c.dims[0]}});
  } else {
    layout_.push_back({"embed.weight", {c.dims[0], 3, 7, 7}});
  }
  layout_.push_back({"embed.bias", {c.dims[0]}});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 1; j <= c.depths[i]; ++j)
      pat_block_layout(layout_, stage_prefix(i + 1, j), c.dims[i], c.mixer);
    if (i == 3) break;
    const std::string merge = "merge" + std::to_string(i + 1);
    if (c.merge == MergeKind::linear2x2) {
      linear_layout(layout_, merge, 4 * c.dims[i], c.dims[i + 1]);
    } else {
      layout_.push_back({merge + ".weight", {c.dims[i + 1], c.dims[i], 3, 3}});
      layout_.push_back({merge + ".bias", {c.dims[i + 1]}});
    }
  }
  if (c.hr_enabled) {
    for (std::size_t i = 1; i < 4; ++i) {
      const std::size_t s = c.split_factor(i);
      linear_layout(layout_, "hr.split" + std::to_string(i + 1), c.dims[i], s * s * c.dims[0]);
      for (std::size_t j = 1; j <= c.hr_depths[i - 1]; ++j)
        pat_block_layout(layout_, hr_prefix(i + 1, j), c.dims[0], c.mixer);
    }
  }
  if (c.head == HeadKind::classify) {
    layer_norm_layout(layout_, "norm", c.dims[3]);
    linear_layout(layout_, "head", c.dims[3], c.classes);
  }
}

ParamStore PotterModel::initialize(std::uint64_t seed) const {
  return potter::initialize(layout_, seed);
}

void PotterModel::check_weights(const ParamStore& store) const {
  std::string problems;
  std::set<std::string> expected;
  for (const ParamSpec& spec : layout_) {
    expected.insert(spec.name);
    if (!store.contains(spec.name)) {
      problems += "\n  missing " + spec.name + " " + shape_str(spec.shape);
    } else if (store.get(spec.name).shape() != spec.shape) {
      problems += "\n  " + spec.name + " has shape " + shape_str(store.get(spec.name).shape()) +
                  ", expected " + shape_str(spec.shape);
    }
  }
  for (const auto& [name, value] : store.entries())
    if (!expected.contains(name))
      problems += "\n  unexpected " + name + " " + shape_str(value.shape());
  if (!problems.empty())
    fail(ErrorCode::shape_mismatch, "weights do not match the model:" + problems);
}

std::array<Var, 4> PotterModel::basic_stream(Tape& tape, const Binding& b, Var image) const {
  const ModelConfig& c = config_;
  const Shape s = shape_of(tape, image);
  if (s != Shape{3, c.input_h, c.input_w})
    fail(ErrorCode::shape_mismatch, "model expects an image " +
                                        shape_str({3, c.input_h, c.input_w}) + ", got " +
                                        shape_str(s));
  Var x = c.embed == EmbedKind::patchify
              ? patch_embed(tape, image, c.patch_size, b["embed.weight"], b["embed.bias"])
              : conv2d(tape, image, b["embed.weight"], b["embed.bias"], 4, 2);
  std::array<Var, 4> out;
  for (std::size_t i = 0; i < 4; ++i) {
    const Factorization f = c.factorization(i);
    for (std::size_t j = 1; j <= c.depths[i]; ++j)
      x = pat_block(tape, x, bind_pat_block(b, stage_prefix(i + 1, j), c.mixer, f));
    out[i] = x;
    if (i == 3) break;
    const std::string merge = "merge" + std::to_string(i + 1);
    x = c.merge == MergeKind::linear2x2
            ? patch_merge(tape, x, b[merge + ".weight"], b[merge + ".bias"])
            : conv2d(tape, x, b[merge + ".weight"], b[merge + ".bias"], 2, 1);
  }
  return out;
}

Var PotterModel::hr_stream(Tape& tape, const Binding& b, const std::array<Var, 4>& stages) const {
  const ModelConfig& c = config_;
  if (!c.hr_enabled) fail(ErrorCode::config, "hr_stream called with the HR stream disabled");
  const Factorization f = c.factorization(0);
  Var state = stages[0];
  for (std::size_t i = 1; i < 4; ++i) {
    const std::string split = "hr.split" + std::to_string(i + 1);
    const Var up =
        patch_split(tape, stages[i], c.split_factor(i), b[split + ".weight"], b[split + ".bias"]);
    if (shape_of(tape, up) != shape_of(tape, state))
      fail(ErrorCode::shape_mismatch, "split of stage " + std::to_string(i + 1) + " gives " +
                                          shape_str(shape_of(tape, up)) +
                                          " but the HR state is " +
                                          shape_str(shape_of(tape, state)));
    state = add(tape, state, up);
    for (std::size_t j = 1; j <= c.hr_depths[i - 1]; ++j)
      state = pat_block(tape, state, bind_pat_block(b, hr_prefix(i + 1, j), c.mixer, f));
  }
  return state;
}

ModelOutputs PotterModel::forward(Tape& tape, const Binding& b, Var image) const {
  ModelOutputs out;
  out.stages = basic_stream(tape, b, image);
  if (config_.hr_enabled) out.hr = hr_stream(tape, b, out.stages);
  if (config_.head == HeadKind::classify) {
    const Var normed = layer_norm(tape, out.stages[3], b["norm.gamma"], b["norm.beta"]);
    out.output = classify_head(tape, normed, b["head.weight"], b["head.bias"]);
  } else {
    out.output = config_.hr_enabled ? out.hr : out.stages[3];
  }
  return out;
}

Tensor PotterModel::infer(const ParamStore& params, const Tensor& image) const {
  check_weights(params);
  Tape tape(false);
  const Binding b(tape, params);
  const ModelOutputs out = forward(tape, b, tape.leaf(image));
  return tape.value(out.output);
}

Tensor regress_joints(const Tensor& mesh, const Tensor& regressor) {
  if (mesh.rank() != 2 || mesh.extent(1) != 3)
    fail(ErrorCode::shape_mismatch, "mesh must be [Nv,3], got " + shape_str(mesh.shape()));
  if (regressor.rank() != 2 || regressor.extent(1) != mesh.extent(0))
    fail(ErrorCode::shape_mismatch, "regressor " + shape_str(regressor.shape()) +
                                        " does not match mesh " + shape_str(mesh.shape()));
  const std::size_t k = regressor.extent(0), nv = mesh.extent(0);
  Tensor joints({k, 3});
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t v = 0; v < nv; ++v) {
      const double w = regressor[j * nv + v];
      for (std::size_t a = 0; a < 3; ++a) joints[j * 3 + a] += w * mesh[v * 3 + a];
    }
  return joints;
}

namespace {

double squared_residual(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    fail(ErrorCode::shape_mismatch, std::string("hmr_loss: ") + what + " prediction " +
                                        shape_str(a.shape()) + " vs target " +
                                        shape_str(b.shape()));
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    total += r * r;
  }
  return total;
}

Var squared_residual(Tape& tape, Var a, Var b) {
  const Var r = sub(tape, a, b);
  return sum(tape, mul(tape, r, r));
}

}  // namespace

double hmr_loss(const HmrTargets& pred, const HmrTargets& gt, HmrWeights w) {
  return w.beta * squared_residual(pred.beta, gt.beta, "beta") +
         w.theta * squared_residual(pred.theta, gt.theta, "theta") +
         w.joints * squared_residual(pred.joints, gt.joints, "joints");
}

Var hmr_loss(Tape& tape, const HmrVars& pred, const HmrVars& gt, HmrWeights w) {
  const Var lb = scale(tape, squared_residual(tape, pred.beta, gt.beta), w.beta);
  const Var lt = scale(tape, squared_residual(tape, pred.theta, gt.theta), w.theta);
  const Var lj = scale(tape, squared_residual(tape, pred.joints, gt.joints), w.joints);
  return add(tape, add(tape, lb, lt), lj);
}

}  // namespace potter
