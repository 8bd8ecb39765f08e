// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "potter/error.hpp"
#include "potter/harness.hpp"
#include "potter/mixers.hpp"
#include "potter/ops.hpp"
#include "potter/profiler.hpp"
#include "potter/rng.hpp"

namespace potter {

bool SuiteReport::passed() const { return failures() == 0; }

std::size_t SuiteReport::failures() const {
  std::size_t n = 0;
  for (const CheckEntry& e : entries) n += e.passed ? 0 : 1;
  return n;
}

std::string SuiteReport::to_text() const {
  std::ostringstream out;
  char line[512];
  for (const CheckEntry& e : entries) {
    std::snprintf(line, sizeof line, "%-4s %-10s %-34s seed %-3llu %.3e  %s\n",
                  e.passed ? "ok" : "FAIL", e.suite.c_str(), e.name.c_str(),
                  static_cast<unsigned long long>(e.seed), e.value, e.detail.c_str());
    out << line;
  }
  out << entries.size() - failures() << "/" << entries.size() << " checks passed\n";
  return out.str();
}

std::string SuiteReport::to_json(int indent) const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const CheckEntry& e : entries)
    list.push_back({{"suite", e.suite}, {"name", e.name}, {"seed", e.seed}, {"value", e.value},
                    {"passed", e.passed}, {"detail", e.detail}});
  j["checks"] = list;
  j["failures"] = failures();
  j["passed"] = passed();
  return j.dump(indent);
}

// ---------------------------------------------------------------- gradients

namespace {

using Inputs = std::function<std::vector<Tensor>(std::uint64_t)>;

Inputs uniform_inputs(std::vector<Shape> shapes, double lo = -1.0, double hi = 1.0) {
  return [shapes = std::move(shapes), lo, hi](std::uint64_t seed) {
    CounterRng rng = CounterRng(seed).fork(0x6772616463686bull);
    std::vector<Tensor> out;
    for (const Shape& s : shapes) out.push_back(uniform_tensor(rng, s, lo, hi));
    return out;
  };
}

/// Input x of the given shape followed by every tensor of a layout.
Inputs layout_inputs(Shape x, ParamLayout layout) {
  std::vector<Shape> shapes{std::move(x)};
  for (const ParamSpec& spec : layout) shapes.push_back(spec.shape);
  return uniform_inputs(std::move(shapes));
}

GradCase block_case(MixerKind kind) {
  ParamLayout layout;
  pat_block_layout(layout, "b", 6, kind);
  return {std::string("pat_block/") + to_string(kind), layout_inputs({6, 2, 3}, layout),
          [layout, kind](Tape& t, std::span<const Var> v) {
            const Binding b(layout, v.subspan(1));
            return pat_block(t, v[0], bind_pat_block(b, "b", kind, {2, 3}));
          }};
}

GradCase model_case(const std::string& name) {
  auto model = std::make_shared<PotterModel>(preset(name));
  GradCase c;
  c.name = "model/" + name;
  c.max_coords = 3;
  c.inputs = [model](std::uint64_t seed) {
    CounterRng rng = CounterRng(seed).fork(0x6d6f64656cull);
    const ModelConfig& cfg = model->config();
    std::vector<Tensor> out{uniform_tensor(rng, {3, cfg.input_h, cfg.input_w}, 0, 1)};
    const ParamStore init = model->initialize(seed);
    for (const auto& [pname, t] : init.entries()) {
      Tensor v = t;
      for (double& x : v.values()) x += rng.uniform(-0.1, 0.1);
      out.push_back(std::move(v));
    }
    return out;
  };
  c.build = [model](Tape& t, std::span<const Var> v) {
    const Binding b(model->layout(), v.subspan(1));
    return model->forward(t, b, v[0]).output;
  };
  return c;
}

}  // namespace

std::vector<GradCase> standard_grad_cases() {
  std::vector<GradCase> cases;
  const auto add_case = [&](std::string name, Inputs inputs, GraphBuilder build) {
    cases.push_back({std::move(name), std::move(inputs), std::move(build), 0});
  };
  add_case("add", uniform_inputs({{2, 3}, {2, 3}}),
           [](Tape& t, std::span<const Var> v) { return add(t, v[0], v[1]); });
  add_case("sub", uniform_inputs({{2, 3}, {2, 3}}),
           [](Tape& t, std::span<const Var> v) { return sub(t, v[0], v[1]); });
  add_case("mul", uniform_inputs({{2, 3}, {2, 3}}),
           [](Tape& t, std::span<const Var> v) { return mul(t, v[0], v[1]); });
  add_case("scale", uniform_inputs({{2, 3}}),
           [](Tape& t, std::span<const Var> v) { return scale(t, v[0], -0.7); });
  add_case("sum", uniform_inputs({{2, 3, 2}}),
           [](Tape& t, std::span<const Var> v) { return sum(t, v[0]); });
  add_case("axis_mean", uniform_inputs({{2, 3, 4}}),
           [](Tape& t, std::span<const Var> v) { return axis_mean(t, v[0], 1); });
  add_case("matmul", uniform_inputs({{2, 3, 4}, {2, 4, 2}}),
           [](Tape& t, std::span<const Var> v) { return matmul(t, v[0], v[1]); });
  add_case("reshape", uniform_inputs({{2, 3, 4}}), [](Tape& t, std::span<const Var> v) {
    const Var r = reshape(t, v[0], {6, 4});
    return mul(t, r, r);
  });
  add_case("permute", uniform_inputs({{2, 3, 4}}), [](Tape& t, std::span<const Var> v) {
    const Var p = permute(t, v[0], {2, 0, 1});
    return mul(t, p, p);
  });
  add_case("depthwise_conv3x3", uniform_inputs({{3, 4, 5}, {3, 3, 3}, {3}}),
           [](Tape& t, std::span<const Var> v) { return depthwise_conv3x3(t, v[0], v[1], v[2]); });
  add_case("conv2d", uniform_inputs({{2, 5, 6}, {3, 2, 3, 3}, {3}}),
           [](Tape& t, std::span<const Var> v) { return conv2d(t, v[0], v[1], v[2], 2, 1); });
  add_case("layer_norm", uniform_inputs({{4, 2, 3}, {4}, {4}}),
           [](Tape& t, std::span<const Var> v) { return layer_norm(t, v[0], v[1], v[2]); });
  add_case("linear", uniform_inputs({{3, 2, 2}, {3, 5}, {5}}),
           [](Tape& t, std::span<const Var> v) { return linear(t, v[0], v[1], v[2]); });
  add_case("gelu", uniform_inputs({{2, 3, 4}}, -3, 3),
           [](Tape& t, std::span<const Var> v) { return gelu(t, v[0]); });
  add_case("softmax", uniform_inputs({{3, 4}}, -2, 2),
           [](Tape& t, std::span<const Var> v) { return softmax(t, v[0], 1); });
  add_case("avg_pool3x3", uniform_inputs({{2, 4, 5}}),
           [](Tape& t, std::span<const Var> v) { return avg_pool3x3(t, v[0]); });
  add_case("cross_entropy", uniform_inputs({{5}}, -2, 2),
           [](Tape& t, std::span<const Var> v) { return cross_entropy(t, v[0], 3); });
  add_case("patchwise_pool_attention", uniform_inputs({{3, 4, 5}}),
           [](Tape& t, std::span<const Var> v) { return patchwise_pool_attention(t, v[0]); });
  add_case("embedwise_pool_attention", uniform_inputs({{6, 2, 3}}),
           [](Tape& t, std::span<const Var> v) {
             return embedwise_pool_attention(t, v[0], {2, 3});
           });
  {
    ParamLayout layout;
    poolattn_layout(layout, "m", 6);
    add_case("poolattn", layout_inputs({6, 2, 3}, layout),
             [layout](Tape& t, std::span<const Var> v) {
               return poolattn(t, v[0], bind_poolattn(Binding(layout, v.subspan(1)), "m", {2, 3}));
             });
  }
  add_case("pooling_mixer", uniform_inputs({{3, 4, 4}}),
           [](Tape& t, std::span<const Var> v) { return pooling_mixer(t, v[0]); });
  {
    ParamLayout layout;
    attention_layout(layout, "m", 4);
    add_case("attention_mixer", layout_inputs({4, 2, 3}, layout),
             [layout](Tape& t, std::span<const Var> v) {
               return attention_mixer(t, v[0], bind_attention(Binding(layout, v.subspan(1)), "m"));
             });
  }
  for (MixerKind kind : {MixerKind::poolattn, MixerKind::pooling, MixerKind::attention})
    cases.push_back(block_case(kind));
  add_case("patch_embed", uniform_inputs({{3, 8, 8}, {48, 4}, {4}}),
           [](Tape& t, std::span<const Var> v) { return patch_embed(t, v[0], 4, v[1], v[2]); });
  add_case("patch_merge", uniform_inputs({{3, 4, 4}, {12, 5}, {5}}),
           [](Tape& t, std::span<const Var> v) { return patch_merge(t, v[0], v[1], v[2]); });
  add_case("patch_split", uniform_inputs({{4, 2, 2}, {4, 8}, {8}}),
           [](Tape& t, std::span<const Var> v) { return patch_split(t, v[0], 2, v[1], v[2]); });
  add_case("classify_head", uniform_inputs({{4, 2, 3}, {4, 3}, {3}}),
           [](Tape& t, std::span<const Var> v) { return classify_head(t, v[0], v[1], v[2]); });
  add_case("hmr_loss", uniform_inputs({{10}, {6}, {4, 3}, {10}, {6}, {4, 3}}),
           [](Tape& t, std::span<const Var> v) {
             return hmr_loss(t, {v[0], v[1], v[2]}, {v[3], v[4], v[5]});
           });
  cases.push_back(model_case("micro"));
  cases.push_back(model_case("micro_hr"));
  return cases;
}

SuiteReport run_gradcheck_suite(double tolerance, const std::vector<std::uint64_t>& seeds,
                                const std::vector<GradCase>& cases) {
  SuiteReport report;
  for (const GradCase& c : cases)
    for (std::uint64_t seed : seeds) {
      CheckEntry e;
      e.suite = "grad";
      e.name = c.name;
      e.seed = seed;
      try {
        const GradcheckResult r = gradcheck(c.inputs(seed), c.build, seed, c.max_coords);
        e.value = r.max_rel_error;
        e.passed = r.max_rel_error < tolerance;
        e.detail = std::to_string(r.coordinates) + " coordinates";
      } catch (const std::exception& ex) {
        e.value = INFINITY;
        e.detail = std::string("error: ") + ex.what();
      }
      report.entries.push_back(std::move(e));
    }
  return report;
}

// ---------------------------------------------------------------- invariants

namespace {

/// Loop evaluation of the patch-wise map: mean over the row times mean over
/// the column, per channel.
Tensor patchwise_reference(const Tensor& x) {
  const std::size_t d = x.extent(0), h = x.extent(1), w = x.extent(2);
  Tensor out(x.shape());
  for (std::size_t c = 0; c < d; ++c)
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double row = 0, col = 0;
        for (std::size_t k = 0; k < w; ++k) row += x.at({c, i, k});
        for (std::size_t k = 0; k < h; ++k) col += x.at({c, k, j});
        out.at({c, i, j}) = row / double(w) * (col / double(h));
      }
  return out;
}

Tensor embedwise_reference(const Tensor& x, Factorization f) {
  const std::size_t h = x.extent(1), w = x.extent(2);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j)
      for (std::size_t r = 0; r < f.rows; ++r)
        for (std::size_t c = 0; c < f.cols; ++c) {
          double row = 0, col = 0;
          for (std::size_t k = 0; k < f.cols; ++k) row += x.at({r * f.cols + k, i, j});
          for (std::size_t k = 0; k < f.rows; ++k) col += x.at({k * f.cols + c, i, j});
          out.at({r * f.cols + c, i, j}) = row / double(f.cols) * (col / double(f.rows));
        }
  return out;
}

/// Largest 2x2 minor of a rows x cols block (stride apart), relative to scale^2.
double rank1_defect(const Tensor& t, std::size_t offset, std::size_t rows, std::size_t cols,
                    std::size_t row_stride, std::size_t col_stride) {
  const auto m = [&](std::size_t i, std::size_t j) {
    return t[offset + i * row_stride + j * col_stride];
  };
  double scale = 0, worst = 0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) scale = std::max(scale, std::abs(m(i, j)));
  if (scale == 0) return 0;
  for (std::size_t i = 0; i + 1 < rows; ++i)
    for (std::size_t k = i + 1; k < rows; ++k)
      for (std::size_t j = 0; j + 1 < cols; ++j)
        for (std::size_t l = j + 1; l < cols; ++l)
          worst = std::max(worst, std::abs(m(i, j) * m(k, l) - m(i, l) * m(k, j)));
  return worst / (scale * scale);
}

ModelConfig random_config(CounterRng& rng) {
  ModelConfig c;
  c.input_h = 32 * (1 + rng.below(3));
  c.input_w = 32 * (1 + rng.below(3));
  for (auto& d : c.dims) d = 1 + rng.below(12);
  for (auto& n : c.depths) n = rng.below(2);
  for (auto& m : c.hr_depths) m = rng.below(2);
  c.hr_enabled = rng.below(2) == 1;
  c.mixer = static_cast<MixerKind>(rng.below(3));
  c.head = HeadKind::features;
  c.classes = 0;
  return c;
}

struct Checker {
  SuiteReport& report;
  std::uint64_t seed;

  void operator()(const std::string& name, double value, bool passed, std::string detail) {
    report.entries.push_back({"invariants", name, seed, value, passed, std::move(detail)});
  }

  template <typename F>
  void guarded(const std::string& name, F&& f) {
    try {
      f();
    } catch (const std::exception& ex) {
      (*this)(name, INFINITY, false, std::string("error: ") + ex.what());
    }
  }
};

}  // namespace

SuiteReport run_invariants_suite(std::uint64_t seed) {
  SuiteReport report;
  Checker check{report, seed};
  CounterRng rng = CounterRng(seed).fork(0x696e76ull);

  check.guarded("shape_ladder", [&] {
    std::size_t bad = 0;
    std::string first;
    for (int trial = 0; trial < 20; ++trial) {
      const ModelConfig c = random_config(rng);
      const PotterModel model(c);
      Tape tape(false);
      const ModelOutputs out = model.forward(tape, Binding(tape, model.initialize(trial)),
                                             tape.leaf(Tensor({3, c.input_h, c.input_w})));
      for (std::size_t i = 0; i < 4; ++i) {
        const Shape want{c.dims[i], c.input_h >> (i + 2), c.input_w >> (i + 2)};
        if (tape.value(out.stages[i]).shape() != want) {
          ++bad;
          if (first.empty()) first = config_to_json(c);
        }
      }
      if (c.hr_enabled &&
          tape.value(out.hr).shape() != Shape{c.dims[0], c.input_h / 4, c.input_w / 4})
        ++bad;
    }
    check("shape_ladder", double(bad), bad == 0,
          bad ? "first mismatch in " + first : "20 random configs");
  });

  check.guarded("residual_identity", [&] {
    double worst = 0;
    for (MixerKind kind : {MixerKind::poolattn, MixerKind::attention}) {
      ParamLayout layout;
      pat_block_layout(layout, "b", 6, kind);
      ParamStore zero;
      for (const ParamSpec& s : layout) zero.add(s.name, Tensor(s.shape));
      const Tensor x = uniform_tensor(rng, {6, 3, 4}, -2, 2);
      Tape tape(false);
      const Tensor y =
          tape.value(pat_block(tape, tape.leaf(x), bind_pat_block(Binding(tape, zero), "b", kind,
                                                                  {2, 3})));
      worst = std::max(worst, max_abs_diff(x, y));
    }
    check("residual_identity", worst, worst == 0.0, "zero-weight PAT block, bitwise");
  });

  check.guarded("brute_force_pool_attention", [&] {
    double worst = 0, defect = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t rows = 1 + rng.below(4), cols = 1 + rng.below(4);
      const std::size_t d = rows * cols, h = 1 + rng.below(5), w = 1 + rng.below(5);
      const Tensor x = uniform_tensor(rng, {d, h, w}, -1, 1);
      Tape tape(false);
      const Tensor pw = tape.value(patchwise_pool_attention(tape, tape.leaf(x)));
      const Tensor ew = tape.value(embedwise_pool_attention(tape, tape.leaf(x), {rows, cols}));
      worst = std::max({worst, max_abs_diff(pw, patchwise_reference(x)),
                        max_abs_diff(ew, embedwise_reference(x, {rows, cols}))});
      for (std::size_t c = 0; c < d; ++c)
        defect = std::max(defect, rank1_defect(pw, c * h * w, h, w, w, 1));
      for (std::size_t p = 0; p < h * w; ++p)
        defect = std::max(defect, rank1_defect(ew, p, rows, cols, cols * h * w, h * w));
    }
    check("brute_force_pool_attention", worst, worst <= 1e-12, "100 inputs vs loop reference");
    check("rank1_attention_maps", defect, defect <= 1e-15, "largest relative 2x2 minor");
  });

  check.guarded("determinism", [&] {
    const PotterModel model(preset("micro_hr"));
    const ParamStore a = model.initialize(seed), b = model.initialize(seed);
    const Tensor img = uniform_tensor(rng, {3, 32, 32}, 0, 1);
    const bool same = a == b && model.infer(a, img) == model.infer(b, img) &&
                      generate_synth(seed, 8, 4, 32, 32).images ==
                          generate_synth(seed, 8, 4, 32, 32).images;
    check("determinism", same ? 0.0 : 1.0, same, "init, forward and data, bitwise");
  });

  check.guarded("hr_resolution", [&] {
    std::size_t bad = 0;
    for (int trial = 0; trial < 5; ++trial) {
      ModelConfig c = random_config(rng);
      c.hr_enabled = true;
      const PotterModel model(c);
      if (model.infer(model.initialize(trial), Tensor({3, c.input_h, c.input_w})).shape() !=
          Shape{c.dims[0], c.input_h / 4, c.input_w / 4})
        ++bad;
    }
    check("hr_resolution", double(bad), bad == 0, "HR output is [D1, H/4, W/4]");
  });

  check.guarded("formula_parity", [&] {
    std::size_t bad = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const std::uint64_t d = 1 + rng.below(1024), n = 1 + rng.below(4096);
      const ComplexityReport r = profile_pat_block(MixerKind::poolattn, d, n, CountMode::table);
      ParamLayout layout;
      pat_block_layout(layout, "b", d, MixerKind::poolattn);
      const Counts want = closed_form_pat(d, n);
      if (r.total_params != want.params || r.total_macs != want.macs ||
          layout_numel(layout) - 9 * d != want.params)
        ++bad;
    }
    check("formula_parity", double(bad), bad == 0, "50 random (D,N): 30D+8D^2, 27DN+8D^2N");
  });

  check.guarded("ablation_delta", [&] {
    std::size_t bad = 0;
    for (int trial = 0; trial < 20; ++trial) {
      ModelConfig c = random_config(rng);
      c.mixer = MixerKind::poolattn;
      const std::uint64_t with = layout_numel(PotterModel(c).layout());
      c.mixer = MixerKind::pooling;
      const std::uint64_t without = layout_numel(PotterModel(c).layout());
      std::uint64_t want = 0;
      for (std::size_t i = 0; i < 4; ++i) want += 30 * c.depths[i] * c.dims[i];
      if (c.hr_enabled)
        for (std::size_t m : c.hr_depths) want += 30 * m * c.dims[0];
      if (with - without != want) ++bad;
    }
    check("ablation_delta", double(bad), bad == 0, "PoolAttn - pooling = 30 * sum(depth * dim)");
  });

  check.guarded("hmr_loss", [&] {
    double worst = 0;
    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
      const HmrTargets gt{uniform_tensor(rng, {10}, -1, 1), uniform_tensor(rng, {72}, -1, 1),
                          uniform_tensor(rng, {24, 3}, -1, 1)};
      HmrTargets pred{uniform_tensor(rng, {10}, -1, 1), uniform_tensor(rng, {72}, -1, 1),
                      uniform_tensor(rng, {24, 3}, -1, 1)};
      ok = ok && hmr_loss(gt, gt) == 0.0;
      double hand = 0;
      for (auto [p, g, w] : {std::tuple{&pred.beta, &gt.beta, 0.01},
                             std::tuple{&pred.theta, &gt.theta, 0.01},
                             std::tuple{&pred.joints, &gt.joints, 1.0}}) {
        double s = 0;
        for (std::size_t i = 0; i < p->size(); ++i) s += ((*p)[i] - (*g)[i]) * ((*p)[i] - (*g)[i]);
        hand += w * s;
      }
      const double loss = hmr_loss(pred, gt);
      worst = std::max(worst, std::abs(loss - hand));
      HmrTargets doubled = pred;
      for (auto [p, g] : {std::pair{&doubled.beta, &gt.beta}, std::pair{&doubled.theta, &gt.theta},
                          std::pair{&doubled.joints, &gt.joints}})
        for (std::size_t i = 0; i < p->size(); ++i) (*p)[i] = 2 * (*p)[i] - (*g)[i];
      ok = ok && loss > 0 && std::abs(hmr_loss(doubled, gt) - 4 * loss) <= 1e-12 * loss;
    }
    check("hmr_loss", worst, ok && worst <= 1e-12, "zero at target, hand sums, quadratic");
  });

  check.guarded("merge_locality", [&] {
    std::size_t bad = 0;
    for (int trial = 0; trial < 10; ++trial) {
      Tensor x = uniform_tensor(rng, {3, 6, 8}, -1, 1);
      const Tensor w = uniform_tensor(rng, {12, 2}, -1, 1), b = uniform_tensor(rng, {2}, -1, 1);
      const auto merged = [&](const Tensor& in) {
        Tape t(false);
        return Tensor(t.value(patch_merge(t, t.leaf(in), t.leaf(w), t.leaf(b))));
      };
      const Tensor before = merged(x);
      const std::size_t i = rng.below(6), j = rng.below(8);
      x.at({rng.below(3), i, j}) += 1.0;
      const Tensor after = merged(x);
      for (std::size_t e = 0; e < 2; ++e)
        for (std::size_t y = 0; y < 3; ++y)
          for (std::size_t z = 0; z < 4; ++z)
            if ((y != i / 2 || z != j / 2) && before.at({e, y, z}) != after.at({e, y, z})) ++bad;
    }
    check("merge_locality", double(bad), bad == 0, "only the source 2x2 block matters");
  });

  check.guarded("split_inversion", [&] {
    double worst = 0;
    for (std::size_t s : {2, 4, 8}) {
      const std::size_t d1 = 2, d = s * s * d1;
      const Tensor x = uniform_tensor(rng, {d, 2, 2}, -1, 1);
      Tensor eye({d, d});
      for (std::size_t i = 0; i < d; ++i) eye.at({i, i}) = 1.0;
      Tape t(false);
      const Tensor up =
          t.value(patch_split(t, t.leaf(x), s, t.leaf(eye), t.leaf(Tensor({d}))));
      for (std::size_t c = 0; c < d1; ++c)
        for (std::size_t y = 0; y < 2; ++y)
          for (std::size_t z = 0; z < 2; ++z)
            for (std::size_t a = 0; a < s; ++a)
              for (std::size_t b = 0; b < s; ++b)
                worst = std::max(worst, std::abs(up.at({c, y * s + a, z * s + b}) -
                                                 x.at({c * s * s + a * s + b, y, z})));
    }
    check("split_inversion", worst, worst == 0.0, "identity weights invert exactly");
  });

  check.guarded("count_scaling", [&] {
    const ModelConfig c = preset("micro_hr");
    const ComplexityReport one = count_macs(c, 32, 32, CountMode::exact, 1);
    const ComplexityReport three = count_macs(c, 32, 32, CountMode::exact, 3);
    const ComplexityReport other = count_macs(c, 64, 96, CountMode::exact, 1);
    const bool ok = three.total_macs == 3 * one.total_macs &&
                    other.total_params == one.total_params &&
                    one.total_params == layout_numel(PotterModel(c).layout());
    check("count_scaling", ok ? 0.0 : 1.0, ok, "MACs linear in batch, params input-free");
  });

  return report;
}

}  // namespace potter
