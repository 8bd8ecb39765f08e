// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "potter/tape.hpp"

namespace potter {

// Differentiable primitives. Feature maps are channel-first [D, h, w].

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
/// Sum of all values, shape [1].
Var sum(Tape& tape, Var a);

/// Mean along one axis; the axis is kept with extent 1.
Var axis_mean(Tape& tape, Var t, std::size_t axis);

/// Batched product of [..., m, k] and [..., k, n]; leading axes must match.
Var matmul(Tape& tape, Var a, Var b);

Var reshape(Tape& tape, Var t, Shape shape);
Var permute(Tape& tape, Var t, const std::vector<std::size_t>& order);

/// Per-channel 3x3 convolution, stride 1, zero padding 1.
/// weight [D,3,3], bias [D].
Var depthwise_conv3x3(Tape& tape, Var x, Var weight, Var bias);

/// Dense convolution of x [C,H,W] with weight [O,C,k,k] and bias [O].
Var conv2d(Tape& tape, Var x, Var weight, Var bias, std::size_t stride,
           std::size_t padding);

inline constexpr double kLayerNormEps = 1e-5;

/// Normalizes over axis 0 independently at every trailing position, then
/// applies gamma/beta channelwise.
Var layer_norm(Tape& tape, Var x, Var gamma, Var beta,
               double eps = kLayerNormEps);

/// Affine map over axis 0 at every trailing position:
/// y[e, p] = sum_d W[d, e] x[d, p] + b[e]. W is [in, out]; bias may be none.
Var linear(Tape& tape, Var x, Var weight, Var bias);

/// Exact erf form.
Var gelu(Tape& tape, Var x);
Var softmax(Tape& tape, Var x, std::size_t axis);

/// 3x3 average, stride 1, zero padding 1, always divided by 9.
Var avg_pool3x3(Tape& tape, Var x);

/// -log softmax(logits)[label] for logits of shape [k]; result shape [1].
Var cross_entropy(Tape& tape, Var logits, std::size_t label);

/// Central-difference gradient of a scalar function.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f,
                        const Tensor& x, double eps = 1e-6);

}  // namespace potter
