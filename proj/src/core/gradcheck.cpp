// SPDX-License-Identifier: Apache-2.0
#include "potter/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "potter/error.hpp"
#include "potter/ops.hpp"
#include "potter/rng.hpp"

namespace potter {

namespace {

double projected(const Tensor& y, const Tensor& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
  return s;
}

}  // namespace

GradcheckResult gradcheck(const std::vector<Tensor>& inputs, const GraphBuilder& build,
                          std::uint64_t seed, std::size_t max_coords, double eps) {
  if (inputs.empty()) fail(ErrorCode::invalid_argument, "gradcheck needs at least one input");
  CounterRng rng = CounterRng(seed).fork(0x67726164);

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.leaf(t, true));
  const Var out = build(tape, vars);
  const Tensor r = uniform_tensor(rng, tape.value(out).shape(), -1.0, 1.0);
  tape.backward(out, r);

  GradcheckResult result;
  std::vector<Tensor> probe = inputs;
  const auto evaluate = [&] {
    Tape t(false);
    std::vector<Var> v;
    for (const Tensor& p : probe) v.push_back(t.leaf(p));
    return projected(t.value(build(t, v)), r);
  };

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = tape.grad(vars[k]);
    std::vector<std::size_t> coords(inputs[k].size());
    std::iota(coords.begin(), coords.end(), 0);
    if (max_coords && coords.size() > max_coords) {
      for (std::size_t i = 0; i < max_coords; ++i)
        std::swap(coords[i], coords[i + rng.below(coords.size() - i)]);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t i : coords) {
      const double orig = probe[k][i];
      probe[k][i] = orig + eps;
      const double up = evaluate();
      probe[k][i] = orig - eps;
      const double down = evaluate();
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      result.max_rel_error =
          std::isfinite(err) ? std::max(result.max_rel_error, err) : INFINITY;
      ++result.coordinates;
    }
  }
  return result;
}

}  // namespace potter
