// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "potter/tape.hpp"

namespace potter {

using GraphBuilder = std::function<Var(Tape&, std::span<const Var>)>;

struct GradcheckResult {
  /// max |analytic - numeric| / max(1, |analytic|) over checked coordinates.
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of  sum_i r_i * y_i  (r drawn from the
/// seed, y the builder's output) against central differences for every
/// input. When max_coords is nonzero, each input is probed at no more than
/// that many seeded coordinates.
GradcheckResult gradcheck(const std::vector<Tensor>& inputs, const GraphBuilder& build,
                          std::uint64_t seed, std::size_t max_coords = 0, double eps = 1e-6);

}  // namespace potter
