// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include "potter/tensor.hpp"

namespace potter {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

/// Counter-based generator: draw i is a pure function of (key, i), so streams
/// are identical on every platform and can be forked by key.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;
  /// Standard normal via Box-Muller; no cached second value.
  double normal() noexcept;
  /// Normal(0, sigma) truncated to [-2 sigma, 2 sigma] by rejection.
  double truncated_normal(double sigma) noexcept;

  CounterRng fork(std::uint64_t tag) const noexcept;
  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

Tensor uniform_tensor(CounterRng& rng, Shape shape, double lo, double hi);

}  // namespace potter
