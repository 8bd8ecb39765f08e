// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "potter/tape.hpp"
#include "potter/tensor.hpp"

namespace potter {

/// Named learnable tensors in insertion order.
class ParamStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.contains(name); }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  /// Total scalar count.
  std::size_t numel() const;
  /// Scalar count of tensors whose name starts with prefix.
  std::size_t numel_under(const std::string& prefix) const;

  /// Registers the named tensor as a trainable leaf of the tape.
  Var bind(Tape& tape, const std::string& name) const;

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ParamSpec {
  std::string name;
  Shape shape;
};

/// Names and shapes of a module's parameters, in construction order.
using ParamLayout = std::vector<ParamSpec>;

std::size_t layout_numel(const ParamLayout& layout);

/// Seeded initializers; the stream of each tensor is keyed by (seed, name) so
/// adding or removing unrelated tensors leaves the rest unchanged.
Tensor init_trunc_normal(std::uint64_t seed, const std::string& name, Shape shape,
                         double sigma = 0.02);

/// Builds the store for a layout: "*.weight" truncated normal (sigma 0.02),
/// "*.gamma" ones, everything else zeros.
ParamStore initialize(const ParamLayout& layout, std::uint64_t seed);

/// Every tensor of a store registered once on a tape, looked up by name.
class Binding {
 public:
  Binding(Tape& tape, const ParamStore& store);
  /// Names vars already on a tape; vars[i] is layout[i].
  Binding(const ParamLayout& layout, std::span<const Var> vars);
  Var operator[](const std::string& name) const;

 private:
  std::unordered_map<std::string, Var> vars_;
};

}  // namespace potter
