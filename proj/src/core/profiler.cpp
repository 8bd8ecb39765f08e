// SPDX-License-Identifier: Apache-2.0
#include "potter/profiler.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "potter/error.hpp"
#include "potter/ops.hpp"
#include "potter/params.hpp"
#include "potter/rng.hpp"

namespace potter {

using nlohmann::ordered_json;
using u64 = std::uint64_t;

const char* to_string(CountMode mode) { return mode == CountMode::table ? "table" : "exact"; }

CountMode parse_count_mode(const std::string& name) {
  if (name == "table") return CountMode::table;
  if (name == "exact") return CountMode::exact;
  fail(ErrorCode::invalid_argument, "unknown count mode '" + name + "' (expected table or exact)");
}

void ComplexityReport::add(LayerRecord record) {
  total_params += record.params;
  total_macs += record.macs;
  records.push_back(std::move(record));
}

Counts closed_form_pat(u64 d, u64 n) { return {30 * d + 8 * d * d, 27 * d * n + 8 * d * d * n}; }

Counts closed_form_attention(u64 d, u64 n) {
  return {4 * d * d + 4 * d, 4 * d * n * n + 2 * d * d * n};
}

Counts closed_form_poolattn(u64 d, u64 n) { return {30 * d, 27 * d * n}; }

namespace {

LayerRecord mixer_record(const std::string& name, MixerKind kind, u64 d, u64 n, CountMode mode) {
  const bool exact = mode == CountMode::exact;
  switch (kind) {
    case MixerKind::poolattn: {
      // Three depthwise 3x3 projections; exact adds the two mean reductions
      // and the outer product of each pooling branch.
      const Counts c = closed_form_poolattn(d, n);
      return {name, "poolattn", c.params, c.macs + (exact ? 6 * d * n : 0)};
    }
    case MixerKind::pooling:
      return {name, "pooling", 0, exact ? 9 * d * n : 0};
    case MixerKind::attention: {
      const Counts c = closed_form_attention(d, n);
      return {name, "attention", c.params, exact ? 4 * d * d * n + 2 * d * n * n : c.macs};
    }
  }
  return {};
}

void add_block(ComplexityReport& r, const std::string& prefix, MixerKind kind, u64 d, u64 n,
               CountMode mode) {
  const bool exact = mode == CountMode::exact;
  if (exact) r.add({prefix + ".ln1", "layernorm", 2 * d, 2 * d * n});
  r.add(mixer_record(prefix + ".mixer", kind, d, n, mode));
  if (exact) r.add({prefix + ".ln2", "layernorm", 2 * d, 2 * d * n});
  r.add({prefix + ".mlp1", "linear", 4 * d * d + (exact ? 4 * d : 0), 4 * d * d * n});
  r.add({prefix + ".mlp2", "linear", 4 * d * d + (exact ? d : 0), 4 * d * d * n});
}

u64 grid(const ModelConfig& c, std::size_t h, std::size_t w, std::size_t stage) {
  const std::size_t div = c.patch_size << stage;
  return static_cast<u64>(h / div) * static_cast<u64>(w / div);
}

}  // namespace

ComplexityReport profile_mixer(MixerKind kind, u64 d, u64 n, CountMode mode) {
  if (d == 0 || n == 0) fail(ErrorCode::invalid_argument, "D and N must be positive");
  ComplexityReport r;
  r.subject = std::string("mixer:") + to_string(kind);
  r.mode = mode;
  r.add(mixer_record("mixer", kind, d, n, mode));
  if (kind == MixerKind::attention) {
    const Counts c = closed_form_attention(d, n);
    r.closed_form = ClosedForm{"4D^2+4D", "4DN^2+2D^2N", d, n, c.params, c.macs};
  } else if (kind == MixerKind::poolattn) {
    const Counts c = closed_form_poolattn(d, n);
    r.closed_form = ClosedForm{"30D", "27DN", d, n, c.params, c.macs};
  }
  return r;
}

ComplexityReport profile_pat_block(MixerKind kind, u64 d, u64 n, CountMode mode) {
  if (d == 0 || n == 0) fail(ErrorCode::invalid_argument, "D and N must be positive");
  ComplexityReport r;
  r.subject = std::string("pat_block:") + to_string(kind);
  r.mode = mode;
  add_block(r, "block", kind, d, n, mode);
  if (kind == MixerKind::poolattn) {
    const Counts c = closed_form_pat(d, n);
    r.closed_form = ClosedForm{"30D+8D^2", "27DN+8D^2N", d, n, c.params, c.macs};
  }
  return r;
}

ComplexityReport count_macs(const ModelConfig& c, std::size_t h, std::size_t w, CountMode mode,
                            u64 batch) {
  ModelConfig at = c;
  at.input_h = h;
  at.input_w = w;
  at.validate();
  if (batch == 0) fail(ErrorCode::invalid_argument, "batch must be positive");
  const bool exact = mode == CountMode::exact;
  const auto& dims = c.dims;
  ComplexityReport r;
  r.subject = "model";
  r.mode = mode;
  r.input_h = h;
  r.input_w = w;
  r.batch = batch;

  const u64 d1 = dims[0], n1 = grid(c, h, w, 0);
  const u64 fan_in = c.embed == EmbedKind::patchify ? 3 * c.patch_size * c.patch_size : 3 * 49;
  r.add({"embed", c.embed == EmbedKind::patchify ? "linear" : "conv", fan_in * d1 + d1,
         fan_in * d1 * n1});
  for (std::size_t i = 0; i < 4; ++i) {
    const u64 n = grid(c, h, w, i);
    for (std::size_t j = 1; j <= c.depths[i]; ++j)
      add_block(r, "stage" + std::to_string(i + 1) + ".block" + std::to_string(j), c.mixer,
                dims[i], n, mode);
    if (i == 3) break;
    const u64 taps = c.merge == MergeKind::linear2x2 ? 4 : 9;
    const u64 out = dims[i + 1];
    r.add({"merge" + std::to_string(i + 1), c.merge == MergeKind::linear2x2 ? "linear" : "conv",
           taps * dims[i] * out + out, taps * dims[i] * out * grid(c, h, w, i + 1)});
  }
  if (c.hr_enabled) {
    for (std::size_t i = 1; i < 4; ++i) {
      const u64 s2 = c.split_factor(i) * c.split_factor(i);
      r.add({"hr.split" + std::to_string(i + 1), "split", dims[i] * s2 * d1 + s2 * d1,
             dims[i] * s2 * d1 * grid(c, h, w, i)});
      for (std::size_t j = 1; j <= c.hr_depths[i - 1]; ++j)
        add_block(r, "hr.stage" + std::to_string(i + 1) + ".block" + std::to_string(j), c.mixer,
                  d1, n1, mode);
    }
  }
  if (c.head == HeadKind::classify) {
    const u64 d4 = dims[3], k = c.classes;
    if (exact) r.add({"norm", "layernorm", 2 * d4, 2 * d4 * grid(c, h, w, 3)});
    r.add({"head", "linear", d4 * k + k, d4 * k + (exact ? d4 * grid(c, h, w, 3) : 0)});
  }
  if (batch > 1) {
    r.total_macs = 0;
    for (LayerRecord& rec : r.records) {
      rec.macs *= batch;
      r.total_macs += rec.macs;
    }
  }
  return r;
}

ComplexityReport count_params(const ModelConfig& c, CountMode mode) {
  return count_macs(c, c.input_h, c.input_w, mode, 1);
}

ScalingAudit scaling_audit(MixerKind kind, u64 d, const std::vector<u64>& n_list, CountMode mode,
                           bool timed) {
  if (n_list.empty()) fail(ErrorCode::invalid_argument, "scaling audit needs at least one N");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1])
      fail(ErrorCode::invalid_argument, "scaling audit N list must be strictly ascending");
  ScalingAudit audit;
  audit.kind = kind;
  audit.d = d;
  audit.mode = mode;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    ScalingRow row;
    row.n = n_list[i];
    row.macs = profile_mixer(kind, d, row.n, mode).total_macs;
    if (i > 0 && row.macs > 0 && audit.rows.back().macs > 0)
      row.local_exponent = std::log(double(row.macs) / double(audit.rows.back().macs)) /
                           std::log(double(row.n) / double(audit.rows.back().n));
    if (timed) {
      ParamLayout layout;
      if (kind == MixerKind::poolattn) poolattn_layout(layout, "m", d);
      if (kind == MixerKind::attention) attention_layout(layout, "m", d);
      const ParamStore store = initialize(layout, 0);
      CounterRng rng(row.n);
      const Tensor x = uniform_tensor(rng, {d, 1, row.n}, -1, 1);
      Tape tape(false);
      const Binding b(tape, store);
      const auto start = std::chrono::steady_clock::now();
      const Var in = tape.leaf(x);
      if (kind == MixerKind::poolattn) poolattn(tape, in, bind_poolattn(b, "m", default_factorization(d)));
      if (kind == MixerKind::pooling) pooling_mixer(tape, in);
      if (kind == MixerKind::attention) attention_mixer(tape, in, bind_attention(b, "m"));
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                              start).count();
    }
    if (row.macs > 0) {
      const double lx = std::log(double(row.n)), ly = std::log(double(row.macs));
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
    }
    audit.rows.push_back(row);
  }
  const double m = double(audit.rows.size());
  if (audit.rows.size() > 1 && audit.rows.front().macs > 0)
    audit.fitted_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return audit;
}

namespace {

ordered_json report_json(const ComplexityReport& r) {
  ordered_json j;
  j["subject"] = r.subject;
  j["mode"] = to_string(r.mode);
  if (r.input_h) j["input"] = {r.input_h, r.input_w};
  j["batch"] = r.batch;
  ordered_json recs = ordered_json::array();
  for (const LayerRecord& rec : r.records)
    recs.push_back({{"name", rec.name}, {"kind", rec.kind}, {"params", rec.params},
                    {"macs", rec.macs}});
  j["records"] = recs;
  j["totals"] = {{"params", r.total_params}, {"macs", r.total_macs}};
  if (r.closed_form) {
    const ClosedForm& f = *r.closed_form;
    j["closed_form"] = {{"params_formula", f.params_formula}, {"macs_formula", f.macs_formula},
                        {"D", f.d},   {"N", f.n}, {"params", f.params}, {"macs", f.macs}};
  }
  return j;
}

std::string grouped(u64 v) {
  std::string s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

}  // namespace

std::string report_to_json(const ComplexityReport& report, int indent) {
  return report_json(report).dump(indent);
}

std::string report_to_text(const ComplexityReport& r) {
  std::size_t name_w = 5, kind_w = 4;
  for (const LayerRecord& rec : r.records) {
    name_w = std::max(name_w, rec.name.size());
    kind_w = std::max(kind_w, rec.kind.size());
  }
  std::ostringstream out;
  char line[512];
  out << r.subject << "  mode=" << to_string(r.mode);
  if (r.input_h) out << "  input=" << r.input_h << "x" << r.input_w;
  out << "  batch=" << r.batch << "\n";
  std::snprintf(line, sizeof line, "%-*s  %-*s  %15s  %19s\n", int(name_w), "layer", int(kind_w),
                "kind", "params", "macs");
  out << line;
  for (const LayerRecord& rec : r.records) {
    std::snprintf(line, sizeof line, "%-*s  %-*s  %15s  %19s\n", int(name_w), rec.name.c_str(),
                  int(kind_w), rec.kind.c_str(), grouped(rec.params).c_str(),
                  grouped(rec.macs).c_str());
    out << line;
  }
  std::snprintf(line, sizeof line, "%-*s  %-*s  %15s  %19s\n", int(name_w), "total", int(kind_w),
                "", grouped(r.total_params).c_str(), grouped(r.total_macs).c_str());
  out << line;
  std::snprintf(line, sizeof line, "= %.3fM params, %.3fG MACs\n", double(r.total_params) / 1e6,
                double(r.total_macs) / 1e9);
  out << line;
  if (r.closed_form) {
    const ClosedForm& f = *r.closed_form;
    out << "closed form at D=" << f.d << " N=" << f.n << ": params " << f.params_formula << " = "
        << grouped(f.params) << ", macs " << f.macs_formula << " = " << grouped(f.macs) << "\n";
  }
  return out.str();
}

std::string audit_to_json(const ScalingAudit& a, int indent) {
  ordered_json j;
  j["mixer"] = to_string(a.kind);
  j["D"] = a.d;
  j["mode"] = to_string(a.mode);
  ordered_json rows = ordered_json::array();
  for (const ScalingRow& row : a.rows) {
    ordered_json r{{"N", row.n}, {"macs", row.macs}, {"local_exponent", row.local_exponent}};
    if (row.wall_ms >= 0) r["wall_ms"] = row.wall_ms;
    rows.push_back(r);
  }
  j["rows"] = rows;
  j["fitted_exponent"] = a.fitted_exponent;
  return j.dump(indent);
}

std::string audit_to_text(const ScalingAudit& a) {
  std::ostringstream out;
  char line[256];
  out << "scaling " << to_string(a.kind) << "  D=" << a.d << "  mode=" << to_string(a.mode) << "\n";
  std::snprintf(line, sizeof line, "%10s  %19s  %8s  %10s\n", "N", "macs", "exponent", "wall_ms");
  out << line;
  for (const ScalingRow& row : a.rows) {
    std::snprintf(line, sizeof line, "%10llu  %19s  %8.4f  %10s\n",
                  static_cast<unsigned long long>(row.n), grouped(row.macs).c_str(),
                  row.local_exponent,
                  row.wall_ms >= 0 ? std::to_string(row.wall_ms).c_str() : "-");
    out << line;
  }
  std::snprintf(line, sizeof line, "fitted exponent %.4f\n", a.fitted_exponent);
  out << line;
  return out.str();
}

}  // namespace potter
