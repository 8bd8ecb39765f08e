// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "potter/backbone.hpp"
#include "potter/gradcheck.hpp"
#include "potter/params.hpp"

namespace potter {

// ---------------------------------------------------------------- data

enum class ShapeKind { rectangle, circle, cross, stripes };

/// Class i is drawn as ShapeKind(i) at a random position and scale, light
/// grey on dark grey, with N(0, 0.05) pixel noise clamped to [0, 1].
struct SynthDataset {
  std::uint64_t seed = 0;
  std::size_t classes = 0;
  Tensor images;                    // [n,3,H,W]
  std::vector<std::size_t> labels;  // balanced to within one per class

  std::size_t size() const { return labels.size(); }
  Tensor image(std::size_t i) const;
};

SynthDataset generate_synth(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t h,
                            std::size_t w);

// ---------------------------------------------------------------- training

enum class LrSchedule { constant, cosine };

const char* to_string(LrSchedule schedule);
LrSchedule parse_lr_schedule(const std::string& name);

struct AdamOptions {
  /// Peak rate. The cosine schedule ramps linearly over warmup_epochs, then
  /// decays to zero at the final epoch.
  double lr = 4e-3;
  LrSchedule schedule = LrSchedule::constant;
  std::size_t warmup_epochs = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Defaults are the settings used for the micro toy run (32 samples).
struct TrainOptions {
  std::size_t epochs = 30;
  std::size_t batch = 4;
  std::uint64_t seed = 0;
  AdamOptions adam;
};

/// Learning rate for the step-th update (0-based) of an epochs x steps run.
double scheduled_lr(const AdamOptions& o, std::uint64_t step, std::uint64_t steps_per_epoch,
                    std::size_t epochs);

/// Everything needed to continue a run. Feature-head models are trained
/// through a pooled linear probe whose tensors live under "probe.".
struct TrainState {
  ParamStore params;
  ParamStore adam_m;
  ParamStore adam_v;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
};

struct EpochRecord {
  std::uint64_t epoch = 0;  // 1-based
  double loss = 0.0;        // mean cross-entropy over the dataset after the epoch
  double accuracy = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::string config_hash;
  std::vector<EpochRecord> epochs;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  double initial_loss = 0.0;
  /// Non-empty when a single-batch run's loss rose after epoch 5.
  std::vector<std::string> flags;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainState initial_train_state(const PotterModel& model, std::size_t classes, std::uint64_t seed);

/// Runs epochs state.epoch+1 .. options.epochs. Throws Error(diverged) on a
/// non-finite loss. A pure function of (config, dataset, options, state).
TrainReport train_toy(const PotterModel& model, const SynthDataset& data, const TrainOptions& options,
                      TrainState& state, const EpochCallback& on_epoch = {});

/// Convenience overload starting from initial_train_state(model, k, options.seed).
TrainReport train_toy(const PotterModel& model, const SynthDataset& data, const TrainOptions& options,
                      const EpochCallback& on_epoch = {});

/// Mean loss and accuracy over the dataset, in dataset order.
EpochRecord evaluate(const PotterModel& model, const ParamStore& params, const SynthDataset& data);

/// Model tensors only (the probe, if any, is dropped).
ParamStore model_params(const PotterModel& model, const ParamStore& params);

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

std::string epoch_jsonl(const EpochRecord& record, const std::string& config_hash);
std::string report_csv(const TrainReport& report);

// ---------------------------------------------------------------- suites

struct CheckEntry {
  std::string suite;  // "grad" or "invariants"
  std::string name;
  std::uint64_t seed = 0;
  double value = 0.0;  // max relative error, or the checked quantity
  bool passed = false;
  std::string detail;
};

struct SuiteReport {
  std::vector<CheckEntry> entries;
  bool passed() const;
  std::size_t failures() const;
  std::string to_text() const;
  std::string to_json(int indent = 2) const;
};

struct GradCase {
  std::string name;
  std::function<std::vector<Tensor>(std::uint64_t seed)> inputs;
  GraphBuilder build;
  std::size_t max_coords = 0;  // 0: every coordinate
};

/// Every differentiable primitive, mixer, backbone stage and the two micro
/// models end to end.
std::vector<GradCase> standard_grad_cases();

SuiteReport run_gradcheck_suite(double tolerance, const std::vector<std::uint64_t>& seeds,
                                const std::vector<GradCase>& cases = standard_grad_cases());

/// Structural properties with fixed thresholds (bitwise, 1e-12 or exact integers).
SuiteReport run_invariants_suite(std::uint64_t seed);

// ---------------------------------------------------------------- ablation

struct AblationRow {
  std::string variant;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  Shape output_shape;
  bool trained = false;
  double final_loss = 0.0;
  double final_accuracy = 0.0;
};

struct AblationTable {
  std::string preset;
  std::string config_hash;
  std::vector<AblationRow> rows;
  /// mixer_ablation: 30 * sum over PAT blocks of their dim, and the measured
  /// params difference. Zero for hr_ablation.
  std::uint64_t predicted_delta = 0;
  std::uint64_t measured_delta = 0;

  std::string to_text() const;
  std::string to_json(int indent = 2) const;
};

struct AblationOptions {
  TrainOptions train;
  std::size_t samples = 32;  // synthetic dataset size; 0 skips training
  std::size_t classes = 4;
};

/// preset: "mixer_ablation" (PoolAttn vs pooling) or "hr_ablation" (without
/// vs with the HR stream, both emitting feature maps).
AblationTable run_ablation(const std::string& preset, const ModelConfig& base,
                           const AblationOptions& options);

}  // namespace potter
