// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "potter/error.hpp"
#include "potter/harness.hpp"
#include "potter/rng.hpp"

namespace potter {

namespace {

constexpr double kNoiseSigma = 0.05;

/// Coverage mask of one shape on an h x w canvas.
bool covers(ShapeKind kind, double y, double x, double cy, double cx, double r, bool vertical) {
  const double dy = y - cy, dx = x - cx;
  switch (kind) {
    case ShapeKind::rectangle:
      return std::abs(dy) <= 0.7 * r && std::abs(dx) <= r;
    case ShapeKind::circle:
      return dy * dy + dx * dx <= r * r;
    case ShapeKind::cross: {
      const double arm = std::max(1.0, 0.3 * r);
      return (std::abs(dy) <= arm && std::abs(dx) <= r) || (std::abs(dx) <= arm && std::abs(dy) <= r);
    }
    case ShapeKind::stripes: {
      if (std::abs(dy) > r || std::abs(dx) > r) return false;
      const double along = vertical ? dx + r : dy + r;
      return static_cast<long>(std::floor(along / 2.0)) % 2 == 0;
    }
  }
  return false;
}

}  // namespace

Tensor SynthDataset::image(std::size_t i) const {
  const Shape& s = images.shape();
  const std::size_t per = s[1] * s[2] * s[3];
  if (i >= s[0]) fail(ErrorCode::invalid_argument, "image index out of range");
  std::vector<double> v(images.values().begin() + static_cast<std::ptrdiff_t>(i * per),
                        images.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
  return Tensor({s[1], s[2], s[3]}, std::move(v));
}

SynthDataset generate_synth(std::uint64_t seed, std::size_t n, std::size_t k, std::size_t h,
                            std::size_t w) {
  if (k == 0 || k > 4)
    fail(ErrorCode::invalid_argument,
         "synthetic data supports 1 to 4 classes (one per shape kind), got " + std::to_string(k));
  if (n == 0) fail(ErrorCode::invalid_argument, "dataset size must be positive");
  if (h == 0 || w == 0 || h % 32 || w % 32)
    fail(ErrorCode::invalid_argument, "image size must be a positive multiple of 32");

  SynthDataset data;
  data.seed = seed;
  data.classes = k;
  data.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) data.labels[i] = i % k;
  CounterRng order = CounterRng(seed).fork(1);
  for (std::size_t i = n; i > 1; --i) std::swap(data.labels[i - 1], data.labels[order.below(i)]);

  data.images = Tensor({n, 3, h, w});
  double* px = data.images.data();
  const double side = static_cast<double>(std::min(h, w));
  for (std::size_t s = 0; s < n; ++s) {
    CounterRng rng = CounterRng(seed).fork(1000 + s);
    const auto kind = static_cast<ShapeKind>(data.labels[s]);
    const double r = rng.uniform(0.18, 0.38) * side;
    const double cy = rng.uniform(r, static_cast<double>(h) - r);
    const double cx = rng.uniform(r, static_cast<double>(w) - r);
    const bool vertical = rng.below(2) == 1;
    const double bg[3] = {0.1, 0.1, 0.1}, fg[3] = {0.9, 0.9, 0.9};
    double* img = px + s * 3 * h * w;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const bool on = covers(kind, static_cast<double>(y) + 0.5, static_cast<double>(x) + 0.5,
                               cy, cx, r, vertical);
        for (std::size_t c = 0; c < 3; ++c) {
          const double v = (on ? fg[c] : bg[c]) + kNoiseSigma * rng.normal();
          img[(c * h + y) * w + x] = std::clamp(v, 0.0, 1.0);
        }
      }
  }
  return data;
}

}  // namespace potter
