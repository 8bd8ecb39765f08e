// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "potter/mixers.hpp"
#include "potter/tensor.hpp"

namespace potter {

enum class HeadKind { classify, features };

/// Stem: non-overlapping p x p patchify (linear on 3p^2 values) or a 7x7
/// stride-4 padding-2 convolution.
enum class EmbedKind { patchify, overlap7 };

/// Downsampling between stages: 2x2 neighbourhood concat + linear, or a 3x3
/// stride-2 padding-1 convolution.
enum class MergeKind { linear2x2, conv3x3 };

struct ModelConfig {
  std::size_t input_h = 224;
  std::size_t input_w = 224;
  std::size_t patch_size = 4;
  std::array<std::size_t, 4> dims{64, 128, 320, 512};
  std::array<std::size_t, 4> depths{2, 2, 6, 2};
  std::array<std::size_t, 3> hr_depths{2, 2, 2};
  bool hr_enabled = false;
  HeadKind head = HeadKind::classify;
  std::size_t classes = 1000;
  /// {0,0} means the default closest-to-square split of that stage's dim.
  std::array<Factorization, 4> factorizations{};
  MixerKind mixer = MixerKind::poolattn;
  EmbedKind embed = EmbedKind::patchify;
  MergeKind merge = MergeKind::linear2x2;

  /// Throws Error(config) naming the first violated constraint.
  void validate() const;

  Factorization factorization(std::size_t stage) const;  // stage in 0..3
  /// [D_i, H/(p 2^i), W/(p 2^i)] for stage index 0..3.
  Shape stage_shape(std::size_t stage) const;
  Shape hr_shape() const;
  /// Shape of the tensor the model emits: logits [k] or its feature map.
  Shape output_shape() const;
  /// Upsampling factor of the split feeding the HR stream from stage 1..3.
  std::size_t split_factor(std::size_t stage) const { return std::size_t{1} << stage; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// "cls_s12", "potter_hmr", "micro", "micro_hr".
ModelConfig preset(const std::string& name);
bool is_preset(const std::string& name);

ModelConfig config_from_json(const std::string& text);
std::string config_to_json(const ModelConfig& config, int indent = -1);
ModelConfig load_config(const std::string& path);
/// 16 hex digits of FNV-1a over the canonical JSON form.
std::string config_hash(const ModelConfig& config);

const char* to_string(HeadKind kind);
const char* to_string(EmbedKind kind);
const char* to_string(MergeKind kind);

}  // namespace potter
