// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "potter/error.hpp"
#include "potter/harness.hpp"
#include "potter/ops.hpp"
#include "potter/profiler.hpp"
#include "potter/rng.hpp"
#include "potter/weights_io.hpp"

namespace potter {

namespace {

using Clock = std::chrono::steady_clock;

bool uses_probe(const PotterModel& model) { return model.config().head == HeadKind::features; }

Var logits_of(Tape& tape, const PotterModel& model, const Binding& b, Var image) {
  const Var out = model.forward(tape, b, image).output;
  if (model.config().head == HeadKind::classify) return out;
  const Var normed = layer_norm(tape, out, b["probe.gamma"], b["probe.beta"]);
  return classify_head(tape, normed, b["probe.weight"], b["probe.bias"]);
}

std::size_t argmax(const Tensor& t) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t[best]) best = i;
  return best;
}

ParamStore zeros_like(const ParamStore& store) {
  ParamStore out;
  for (const auto& [name, t] : store.entries()) out.add(name, Tensor(t.shape()));
  return out;
}

void adam_update(TrainState& s, const Gradients& grads, const AdamOptions& o, double lr) {
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(o.beta1, t);
  const double c2 = 1.0 - std::pow(o.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = s.params.get(name);
    Tensor& m = s.adam_m.get(name);
    Tensor& v = s.adam_v.get(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.eps);
    }
  }
}

void check_data(const PotterModel& model, const SynthDataset& data, std::size_t classes) {
  const ModelConfig& c = model.config();
  const Shape& s = data.images.shape();
  if (s.size() != 4 || s[1] != 3 || s[2] != c.input_h || s[3] != c.input_w)
    fail(ErrorCode::shape_mismatch, "dataset images " + shape_str(s) + " do not fit a " +
                                        std::to_string(c.input_h) + "x" +
                                        std::to_string(c.input_w) + " model");
  if (data.classes > classes)
    fail(ErrorCode::config, "dataset has " + std::to_string(data.classes) +
                                " classes but the head emits " + std::to_string(classes));
}

std::size_t head_classes(const TrainState& state) {
  const std::string name = state.params.contains("head.bias") ? "head.bias" : "probe.bias";
  return state.params.get(name).size();
}

}  // namespace

const char* to_string(LrSchedule schedule) {
  return schedule == LrSchedule::constant ? "constant" : "cosine";
}

LrSchedule parse_lr_schedule(const std::string& name) {
  if (name == "constant") return LrSchedule::constant;
  if (name == "cosine") return LrSchedule::cosine;
  fail(ErrorCode::invalid_argument, "unknown schedule '" + name + "' (expected constant or cosine)");
}

double scheduled_lr(const AdamOptions& o, std::uint64_t step, std::uint64_t steps_per_epoch,
                    std::size_t epochs) {
  if (o.schedule == LrSchedule::constant) return o.lr;
  const double total = static_cast<double>(steps_per_epoch * epochs);
  const double warm = static_cast<double>(steps_per_epoch * o.warmup_epochs);
  const double t = static_cast<double>(step);
  if (t < warm) return o.lr * (t + 1.0) / warm;
  const double span = total - warm;
  const double progress = span > 0 ? std::min(1.0, (t - warm) / span) : 1.0;
  return 0.5 * o.lr * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainState initial_train_state(const PotterModel& model, std::size_t classes, std::uint64_t seed) {
  TrainState s;
  s.params = model.initialize(seed);
  if (uses_probe(model)) {
    const std::size_t d = model.config().output_shape()[0];
    s.params.add("probe.gamma", Tensor::full({d}, 1.0));
    s.params.add("probe.beta", Tensor({d}));
    s.params.add("probe.weight", init_trunc_normal(seed, "probe.weight", {d, classes}));
    s.params.add("probe.bias", Tensor({classes}));
  }
  s.adam_m = zeros_like(s.params);
  s.adam_v = zeros_like(s.params);
  return s;
}

EpochRecord evaluate(const PotterModel& model, const ParamStore& params, const SynthDataset& data) {
  EpochRecord r;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tape tape(false);
    const Binding b(tape, params);
    const Var logits = logits_of(tape, model, b, tape.leaf(data.image(i)));
    loss += tape.value(cross_entropy(tape, logits, data.labels[i])).item();
    if (argmax(tape.value(logits)) == data.labels[i]) ++correct;
  }
  r.loss = loss / static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

TrainReport train_toy(const PotterModel& model, const SynthDataset& data, const TrainOptions& o,
                      TrainState& state, const EpochCallback& on_epoch) {
  if (o.batch == 0) fail(ErrorCode::invalid_argument, "batch size must be positive");
  if (!(o.adam.lr >= 0.0) || !std::isfinite(o.adam.lr))
    fail(ErrorCode::invalid_argument, "learning rate must be finite and non-negative");
  check_data(model, data, head_classes(state));

  TrainReport report;
  report.config_hash = config_hash(model.config());
  const ComplexityReport counts = count_params(model.config(), CountMode::exact);
  report.params = counts.total_params;
  report.macs = counts.total_macs;
  report.initial_loss = evaluate(model, state.params, data).loss;

  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  const std::uint64_t steps_per_epoch = (n + o.batch - 1) / o.batch;
  for (std::uint64_t epoch = state.epoch + 1; epoch <= o.epochs; ++epoch) {
    const auto start = Clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng shuffle = CounterRng(o.seed).fork(0x5348554646000000ull + epoch);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    for (std::size_t first = 0; first < n; first += o.batch) {
      const std::size_t last = std::min(n, first + o.batch);
      Tape tape;
      const Binding b(tape, state.params);
      Var total;
      for (std::size_t k = first; k < last; ++k) {
        const std::size_t i = order[k];
        const Var ce = cross_entropy(tape, logits_of(tape, model, b, tape.leaf(data.image(i))),
                                     data.labels[i]);
        total = total.valid() ? add(tape, total, ce) : ce;
      }
      const Var loss = scale(tape, total, 1.0 / static_cast<double>(last - first));
      const double value = tape.value(loss).item();
      if (!std::isfinite(value))
        fail(ErrorCode::diverged, "training diverged: loss " + std::to_string(value) +
                                      " at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(state.step + 1) + " (lr " +
                                      std::to_string(o.adam.lr) + ")");
      tape.backward(loss);
      adam_update(state, tape.parameter_gradients(), o.adam,
                  scheduled_lr(o.adam, state.step, steps_per_epoch, o.epochs));
    }

    EpochRecord rec = evaluate(model, state.params, data);
    if (!std::isfinite(rec.loss))
      fail(ErrorCode::diverged, "training diverged: evaluation loss is non-finite after epoch " +
                                    std::to_string(epoch));
    rec.epoch = epoch;
    rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    state.epoch = epoch;
    report.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (n <= o.batch)
    for (std::size_t i = 1; i < report.epochs.size(); ++i) {
      const EpochRecord& prev = report.epochs[i - 1];
      const EpochRecord& cur = report.epochs[i];
      if (cur.epoch > 5 && cur.loss > prev.loss) {
        char msg[160];
        std::snprintf(msg, sizeof msg, "loss rose from %.6g to %.6g at epoch %llu", prev.loss,
                      cur.loss, static_cast<unsigned long long>(cur.epoch));
        report.flags.emplace_back(msg);
      }
    }
  return report;
}

TrainReport train_toy(const PotterModel& model, const SynthDataset& data, const TrainOptions& o,
                      const EpochCallback& on_epoch) {
  TrainState state = initial_train_state(model, data.classes, o.seed);
  return train_toy(model, data, o, state, on_epoch);
}

ParamStore model_params(const PotterModel& model, const ParamStore& params) {
  ParamStore out;
  for (const ParamSpec& spec : model.layout()) out.add(spec.name, params.get(spec.name));
  return out;
}

void save_checkpoint(const std::string& path, const TrainState& s) {
  ParamStore all;
  for (const auto& [name, t] : s.params.entries()) all.add("param:" + name, t);
  for (const auto& [name, t] : s.adam_m.entries()) all.add("adam_m:" + name, t);
  for (const auto& [name, t] : s.adam_v.entries()) all.add("adam_v:" + name, t);
  all.add("state:step", Tensor::scalar(static_cast<double>(s.step)));
  all.add("state:epoch", Tensor::scalar(static_cast<double>(s.epoch)));
  save_weights(path, all);
}

TrainState load_checkpoint(const std::string& path) {
  const ParamStore all = load_weights(path);
  TrainState s;
  for (const auto& [name, t] : all.entries()) {
    const auto colon = name.find(':');
    const std::string group = name.substr(0, colon), rest = name.substr(colon + 1);
    if (group == "param") s.params.add(rest, t);
    else if (group == "adam_m") s.adam_m.add(rest, t);
    else if (group == "adam_v") s.adam_v.add(rest, t);
    else if (name == "state:step") s.step = static_cast<std::uint64_t>(t.item());
    else if (name == "state:epoch") s.epoch = static_cast<std::uint64_t>(t.item());
    else fail(ErrorCode::format, "unexpected checkpoint entry '" + name + "'");
  }
  if (!all.contains("state:step") || !all.contains("state:epoch") ||
      s.adam_m.size() != s.params.size() || s.adam_v.size() != s.params.size())
    fail(ErrorCode::format, "'" + path + "' is not a complete training checkpoint");
  return s;
}

std::string epoch_jsonl(const EpochRecord& r, const std::string& hash) {
  nlohmann::ordered_json j{{"epoch", r.epoch},     {"loss", r.loss},
                           {"accuracy", r.accuracy}, {"wall_ms", r.wall_ms},
                           {"config_hash", hash}};
  return j.dump();
}

std::string report_csv(const TrainReport& report) {
  std::string out = "epoch,loss,accuracy,wall_ms,params,macs,config_hash\n";
  char line[256];
  for (const EpochRecord& r : report.epochs) {
    std::snprintf(line, sizeof line, "%llu,%.17g,%.17g,%.3f,%llu,%llu,%s\n",
                  static_cast<unsigned long long>(r.epoch), r.loss, r.accuracy, r.wall_ms,
                  static_cast<unsigned long long>(report.params),
                  static_cast<unsigned long long>(report.macs), report.config_hash.c_str());
    out += line;
  }
  return out;
}

}  // namespace potter
