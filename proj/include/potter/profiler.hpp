// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "potter/config.hpp"
#include "potter/mixers.hpp"

namespace potter {

/// table: PAT blocks counted as mixer weights+biases and MLP weights only;
///        LN, pooling and the squeezed outer products cost nothing, and
///        attention uses 4DN^2 + 2D^2N MACs.
/// exact: every stored scalar; MACs for every multiply-accumulate, including
///        mean reductions and the squeezed products (elementwise ops excluded),
///        and attention at 4D^2N + 2DN^2.
enum class CountMode { table, exact };

const char* to_string(CountMode mode);
CountMode parse_count_mode(const std::string& name);

struct LayerRecord {
  std::string name;
  std::string kind;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct ClosedForm {
  std::string params_formula;
  std::string macs_formula;
  std::uint64_t d = 0;
  std::uint64_t n = 0;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct ComplexityReport {
  std::string subject;
  CountMode mode = CountMode::exact;
  std::size_t input_h = 0;  // pixels for a model, 0 for a single layer
  std::size_t input_w = 0;
  std::uint64_t batch = 1;
  std::vector<LayerRecord> records;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;
  std::optional<ClosedForm> closed_form;

  void add(LayerRecord record);
};

struct Counts {
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  friend bool operator==(const Counts&, const Counts&) = default;
};

Counts closed_form_pat(std::uint64_t d, std::uint64_t n);
Counts closed_form_attention(std::uint64_t d, std::uint64_t n);
Counts closed_form_poolattn(std::uint64_t d, std::uint64_t n);

/// One token mixer at D channels over N tokens (the grid is not needed).
ComplexityReport profile_mixer(MixerKind kind, std::uint64_t d, std::uint64_t n, CountMode mode);
/// One PAT block; in table mode with the PoolAttn mixer the closed form is attached.
ComplexityReport profile_pat_block(MixerKind kind, std::uint64_t d, std::uint64_t n,
                                   CountMode mode);

/// Whole model at an h x w input; MACs scale with batch, params do not.
ComplexityReport count_macs(const ModelConfig& config, std::size_t h, std::size_t w,
                            CountMode mode, std::uint64_t batch = 1);
/// Same records at the config's own input size.
ComplexityReport count_params(const ModelConfig& config, CountMode mode);

struct ScalingRow {
  std::uint64_t n = 0;
  std::uint64_t macs = 0;
  double local_exponent = 0.0;  // log(macs/prev)/log(n/prev); 0 on the first row
  double wall_ms = -1.0;        // measured forward time, -1 when not timed
};

struct ScalingAudit {
  MixerKind kind = MixerKind::poolattn;
  std::uint64_t d = 0;
  CountMode mode = CountMode::table;
  std::vector<ScalingRow> rows;
  double fitted_exponent = 0.0;  // least-squares slope of log macs on log n
};

/// n_list must be strictly ascending. With timed set, each N is also run
/// through the real mixer on a 1 x N grid (informational only).
ScalingAudit scaling_audit(MixerKind kind, std::uint64_t d, const std::vector<std::uint64_t>& n_list,
                           CountMode mode = CountMode::table, bool timed = false);

std::string report_to_json(const ComplexityReport& report, int indent = 2);
std::string report_to_text(const ComplexityReport& report);
std::string audit_to_json(const ScalingAudit& audit, int indent = 2);
std::string audit_to_text(const ScalingAudit& audit);

}  // namespace potter
