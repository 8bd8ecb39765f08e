// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "potter/tensor.hpp"

namespace potter {

enum class Precision { f64, f32 };

/// Handle to a value recorded on a Tape.
struct Var {
  static constexpr std::uint32_t none = std::numeric_limits<std::uint32_t>::max();
  std::uint32_t id = none;
  bool valid() const noexcept { return id != none; }
};

class Tape;

/// Adjoint of one primitive. parent_grads[k] is null when parent k does not
/// require a gradient; otherwise the function adds its contribution to it.
using BackwardFn = std::function<void(const Tape& tape, const Tensor& grad_out,
                                      std::span<Tensor* const> parent_grads)>;

using Gradients = std::map<std::string, Tensor>;

/// Ordered record of primitive applications. Replaying it in reverse order
/// gives the gradient of one output with respect to every leaf that asked for
/// one. Accumulation order is the tape order, so results are bitwise stable.
///
/// With gradients disabled the tape keeps values only.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true, Precision precision = Precision::f64);

  Var leaf(Tensor value, bool requires_grad = false);
  /// Named trainable leaf; names must be unique on one tape.
  Var parameter(const std::string& name, Tensor value);
  Var record(Tensor value, std::vector<Var> parents, BackwardFn fn);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  bool grad_enabled() const noexcept { return grad_enabled_; }
  Precision precision() const noexcept { return precision_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  void backward(Var output, const Tensor& seed);
  /// Seed of ones for a one-element output.
  void backward(Var output);

  /// Gradient reached by the last backward pass; zeros if none arrived.
  Tensor grad(Var v) const;
  /// One entry per registered parameter, zero-filled for unused ones.
  Gradients parameter_gradients() const;
  Var find_parameter(const std::string& name) const;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<Var> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;

  bool grad_enabled_;
  Precision precision_;
  std::vector<Node> nodes_;
  std::map<std::string, Var> parameters_;
};

}  // namespace potter
