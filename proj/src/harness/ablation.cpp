// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "potter/error.hpp"
#include "potter/harness.hpp"
#include "potter/profiler.hpp"

namespace potter {

namespace {

std::uint64_t pat_dim_sum(const ModelConfig& c) {
  std::uint64_t s = 0;
  for (std::size_t i = 0; i < 4; ++i) s += c.depths[i] * c.dims[i];
  if (c.hr_enabled)
    for (std::size_t d : c.hr_depths) s += d * c.dims[0];
  return s;
}

AblationRow measure(const std::string& variant, const ModelConfig& c, const AblationOptions& o) {
  c.validate();
  AblationRow row;
  row.variant = variant;
  row.params = count_params(c, CountMode::exact).total_params;
  row.macs = count_macs(c, c.input_h, c.input_w, CountMode::exact, 1).total_macs;
  row.output_shape = c.output_shape();
  if (o.samples > 0) {
    const PotterModel model(c);
    const SynthDataset data =
        generate_synth(o.train.seed, o.samples, o.classes, c.input_h, c.input_w);
    const TrainReport report = train_toy(model, data, o.train);
    row.trained = true;
    if (!report.epochs.empty()) {
      row.final_loss = report.epochs.back().loss;
      row.final_accuracy = report.epochs.back().accuracy;
    } else {
      row.final_loss = report.initial_loss;
    }
  }
  return row;
}

}  // namespace

AblationTable run_ablation(const std::string& preset, const ModelConfig& base,
                           const AblationOptions& options) {
  ModelConfig cfg = base;
  if (options.samples > 0 && cfg.head == HeadKind::classify) cfg.classes = options.classes;
  AblationTable table;
  table.preset = preset;
  table.config_hash = config_hash(base);
  if (preset == "mixer_ablation") {
    ModelConfig pooling = cfg, poolattn = cfg;
    pooling.mixer = MixerKind::pooling;
    poolattn.mixer = MixerKind::poolattn;
    table.rows.push_back(measure("pooling", pooling, options));
    table.rows.push_back(measure("poolattn", poolattn, options));
    table.predicted_delta = 30 * pat_dim_sum(cfg);
    table.measured_delta = layout_numel(PotterModel(poolattn).layout()) -
                           layout_numel(PotterModel(pooling).layout());
  } else if (preset == "hr_ablation") {
    ModelConfig without = cfg, with = cfg;
    without.head = with.head = HeadKind::features;
    without.hr_enabled = false;
    with.hr_enabled = true;
    table.rows.push_back(measure("without_hr", without, options));
    table.rows.push_back(measure("with_hr", with, options));
  } else {
    fail(ErrorCode::invalid_argument,
         "unknown ablation '" + preset + "' (expected mixer_ablation or hr_ablation)");
  }
  return table;
}

std::string AblationTable::to_text() const {
  std::ostringstream out;
  char line[256];
  out << preset << " (config " << config_hash << ")\n";
  std::snprintf(line, sizeof line, "%-12s %14s %16s  %-16s %10s %9s\n", "variant", "params",
                "MACs", "output", "loss", "accuracy");
  out << line;
  for (const AblationRow& r : rows) {
    if (r.trained)
      std::snprintf(line, sizeof line, "%-12s %14llu %16llu  %-16s %10.4f %9.3f\n",
                    r.variant.c_str(), static_cast<unsigned long long>(r.params),
                    static_cast<unsigned long long>(r.macs), shape_str(r.output_shape).c_str(),
                    r.final_loss, r.final_accuracy);
    else
      std::snprintf(line, sizeof line, "%-12s %14llu %16llu  %-16s %10s %9s\n", r.variant.c_str(),
                    static_cast<unsigned long long>(r.params),
                    static_cast<unsigned long long>(r.macs), shape_str(r.output_shape).c_str(), "-",
                    "-");
    out << line;
  }
  if (preset == "mixer_ablation")
    out << "params delta: predicted " << predicted_delta << ", measured " << measured_delta
        << "\n";
  return out.str();
}

std::string AblationTable::to_json(int indent) const {
  nlohmann::ordered_json j;
  j["ablation"] = preset;
  j["config_hash"] = config_hash;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const AblationRow& r : rows) {
    nlohmann::ordered_json row{{"variant", r.variant},
                               {"params", r.params},
                               {"macs", r.macs},
                               {"output_shape", r.output_shape},
                               {"trained", r.trained}};
    if (r.trained) {
      row["final_loss"] = r.final_loss;
      row["final_accuracy"] = r.final_accuracy;
    }
    list.push_back(row);
  }
  j["rows"] = list;
  if (preset == "mixer_ablation") {
    j["predicted_delta"] = predicted_delta;
    j["measured_delta"] = measured_delta;
  }
  return j.dump(indent);
}

}  // namespace potter
