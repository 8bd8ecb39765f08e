// SPDX-License-Identifier: Apache-2.0
#include "potter/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>

#include "potter/error.hpp"

namespace potter {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    fail(ErrorCode::shape_mismatch, std::string(op) + ": shapes " + shape_str(a.shape()) +
                                        " and " + shape_str(b.shape()) + " differ");
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank)
    fail(ErrorCode::shape_mismatch, std::string(op) + ": expected rank " +
                                        std::to_string(rank) + ", got shape " +
                                        shape_str(t.shape()));
}

void accumulate(Tensor* dst, const Tensor& src) {
  if (!dst) return;
  double* d = dst->data();
  const double* s = src.data();
  for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

std::size_t prod(const Shape& s, std::size_t begin, std::size_t end) {
  std::size_t n = 1;
  for (std::size_t i = begin; i < end; ++i) n *= s[i];
  return n;
}

// c[m,n] += a[m,k] * b[k,n] with optional transposes on the stored operands.
void gemm_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
              std::size_t n, bool trans_a, bool trans_b) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = trans_a ? a[p * m + i] : a[i * k + p];
      if (av == 0.0) continue;
      if (trans_b) {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * k + p];
      } else {
        const double* brow = b + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_slope(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "add");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a, b},
                     [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                       accumulate(pg[0], g);
                       accumulate(pg[1], g);
                     });
}

Var sub(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "sub");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a, b},
                     [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                       accumulate(pg[0], g);
                       if (pg[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
                     });
}

Var mul(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b},
                     [a, b](const Tape& t, const Tensor& g, std::span<Tensor* const> pg) {
                       const Tensor& x = t.value(a);
                       const Tensor& y = t.value(b);
                       if (pg[0])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * y[i];
                       if (pg[1])
                         for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * x[i];
                     });
}

Var scale(Tape& tape, Var a, double factor) {
  Tensor out = tape.value(a);
  for (double& v : out.values()) v *= factor;
  return tape.record(std::move(out), {a},
                     [factor](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                       for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += factor * g[i];
                     });
}

Var sum(Tape& tape, Var a) {
  const Tensor& av = tape.value(a);
  double s = 0.0;
  for (double v : av.values()) s += v;
  return tape.record(Tensor::scalar(s), {a},
                     [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                       const double gv = g[0];
                       for (double& v : pg[0]->values()) v += gv;
                     });
}

Var axis_mean(Tape& tape, Var t, std::size_t axis) {
  const Tensor& x = tape.value(t);
  if (axis >= x.rank())
    fail(ErrorCode::invalid_argument, "axis_mean: axis " + std::to_string(axis) +
                                          " out of range for shape " + shape_str(x.shape()));
  const std::size_t outer = prod(x.shape(), 0, axis);
  const std::size_t n = x.shape()[axis];
  const std::size_t inner = prod(x.shape(), axis + 1, x.rank());
  Shape out_shape = x.shape();
  out_shape[axis] = 1;
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t j = 0; j < n; ++j) {
      const double* src = x.data() + (o * n + j) * inner;
      double* dst = out.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  for (double& v : out.values()) v *= inv;
  return tape.record(std::move(out), {t},
                     [outer, n, inner, inv](const Tape&, const Tensor& g,
                                            std::span<Tensor* const> pg) {
                       double* gx = pg[0]->data();
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t j = 0; j < n; ++j)
                           for (std::size_t i = 0; i < inner; ++i)
                             gx[(o * n + j) * inner + i] += g[o * inner + i] * inv;
                     });
}

Var matmul(Tape& tape, Var a, Var b) {
  const Tensor& av = tape.value(a);
  const Tensor& bv = tape.value(b);
  if (av.rank() < 2 || av.rank() != bv.rank())
    fail(ErrorCode::shape_mismatch, "matmul: incompatible ranks " + shape_str(av.shape()) +
                                        " x " + shape_str(bv.shape()));
  const std::size_t r = av.rank();
  for (std::size_t i = 0; i + 2 < r; ++i)
    if (av.shape()[i] != bv.shape()[i])
      fail(ErrorCode::shape_mismatch, "matmul: leading axes differ " +
                                          shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  const std::size_t m = av.shape()[r - 2];
  const std::size_t k = av.shape()[r - 1];
  const std::size_t n = bv.shape()[r - 1];
  if (bv.shape()[r - 2] != k)
    fail(ErrorCode::shape_mismatch, "matmul: contraction mismatch " +
                                        shape_str(av.shape()) + " x " + shape_str(bv.shape()));
  const std::size_t batch = prod(av.shape(), 0, r - 2);
  Shape out_shape = av.shape();
  out_shape[r - 1] = n;
  Tensor out(out_shape);
  for (std::size_t bi = 0; bi < batch; ++bi)
    gemm_acc(av.data() + bi * m * k, bv.data() + bi * k * n, out.data() + bi * m * n, m, k, n,
             false, false);
  return tape.record(
      std::move(out), {a, b},
      [a, b, batch, m, k, n](const Tape& t, const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& x = t.value(a);
        const Tensor& y = t.value(b);
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const double* gb = g.data() + bi * m * n;
          // dA = G * B^T, dB = A^T * G
          if (pg[0])
            gemm_acc(gb, y.data() + bi * k * n, pg[0]->data() + bi * m * k, m, n, k, false, true);
          if (pg[1])
            gemm_acc(x.data() + bi * m * k, gb, pg[1]->data() + bi * k * n, k, m, n, true, false);
        }
      });
}

Var reshape(Tape& tape, Var t, Shape shape) {
  const Tensor& x = tape.value(t);
  if (shape_numel(shape) != x.size())
    fail(ErrorCode::shape_mismatch, "reshape: cannot view " + shape_str(x.shape()) + " as " +
                                        shape_str(shape));
  return tape.record(x.reshaped(std::move(shape)), {t},
                     [](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                       accumulate(pg[0], g);
                     });
}

namespace {

// Offsets into the source tensor for each destination element of a permute.
std::vector<std::size_t> permute_offsets(const Shape& in_shape,
                                         const std::vector<std::size_t>& order) {
  const std::size_t r = in_shape.size();
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i-- > 0;) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  Shape out_shape(r);
  std::vector<std::size_t> strides(r);
  for (std::size_t i = 0; i < r; ++i) {
    out_shape[i] = in_shape[order[i]];
    strides[i] = in_strides[order[i]];
  }
  const std::size_t total = shape_numel(in_shape);
  std::vector<std::size_t> offsets(total);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t lin = 0; lin < total; ++lin) {
    offsets[lin] = off;
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      off += strides[ax];
      if (idx[ax] < out_shape[ax]) break;
      off -= strides[ax] * out_shape[ax];
      idx[ax] = 0;
    }
  }
  return offsets;
}

}  // namespace

Var permute(Tape& tape, Var t, const std::vector<std::size_t>& order) {
  const Tensor& x = tape.value(t);
  const std::size_t r = x.rank();
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  bool valid = sorted.size() == r;
  for (std::size_t i = 0; valid && i < r; ++i) valid = sorted[i] == i;
  if (!valid)
    fail(ErrorCode::invalid_argument, "permute: axis order is not a permutation of rank " +
                                          std::to_string(r));
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.shape()[order[i]];
  auto offsets = std::make_shared<std::vector<std::size_t>>(permute_offsets(x.shape(), order));
  Tensor out(out_shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[(*offsets)[i]];
  return tape.record(std::move(out), {t},
                     [offsets](const Tape&, const Tensor& g, std::span<Tensor* const> pg) {
                       double* gx = pg[0]->data();
                       for (std::size_t i = 0; i < g.size(); ++i) gx[(*offsets)[i]] += g[i];
                     });
}

Var depthwise_conv3x3(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  require_rank(xv, 3, "depthwise_conv3x3");
  const std::size_t d = xv.shape()[0], h = xv.shape()[1], w = xv.shape()[2];
  if (wv.shape() != Shape{d, 3, 3} || bv.shape() != Shape{d})
    fail(ErrorCode::shape_mismatch, "depthwise_conv3x3: weight " + shape_str(wv.shape()) +
                                        " / bias " + shape_str(bv.shape()) +
                                        " do not match " + std::to_string(d) + " channels");
  Tensor out(xv.shape());
  for (std::size_t c = 0; c < d; ++c) {
    const double* src = xv.data() + c * h * w;
    const double* k = wv.data() + c * 9;
    double* dst = out.data() + c * h * w;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double acc = bv[c];
        for (std::size_t ki = 0; ki < 3; ++ki) {
          const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i + ki) - 1;
          if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kj = 0; kj < 3; ++kj) {
            const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j + kj) - 1;
            if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
            acc += k[ki * 3 + kj] * src[si * w + sj];
          }
        }
        dst[i * w + j] = acc;
      }
  }
  return tape.record(
      std::move(out), {x, weight, bias},
      [x, weight, d, h, w](const Tape& t, const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(weight);
        for (std::size_t c = 0; c < d; ++c) {
          const double* src = xv.data() + c * h * w;
          const double* k = wv.data() + c * 9;
          const double* gc = g.data() + c * h * w;
          double* gx = pg[0] ? pg[0]->data() + c * h * w : nullptr;
          double* gw = pg[1] ? pg[1]->data() + c * 9 : nullptr;
          double gb = 0.0;
          for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j) {
              const double go = gc[i * w + j];
              gb += go;
              for (std::size_t ki = 0; ki < 3; ++ki) {
                const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i + ki) - 1;
                if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
                for (std::size_t kj = 0; kj < 3; ++kj) {
                  const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j + kj) - 1;
                  if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
                  if (gx) gx[si * w + sj] += k[ki * 3 + kj] * go;
                  if (gw) gw[ki * 3 + kj] += src[si * w + sj] * go;
                }
              }
            }
          if (pg[2]) (*pg[2])[c] += gb;
        }
      });
}

Var conv2d(Tape& tape, Var x, Var weight, Var bias, std::size_t stride, std::size_t padding) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  const Tensor& bv = tape.value(bias);
  require_rank(xv, 3, "conv2d");
  require_rank(wv, 4, "conv2d");
  const std::size_t cin = xv.shape()[0], h = xv.shape()[1], w = xv.shape()[2];
  const std::size_t cout = wv.shape()[0], k = wv.shape()[2];
  if (stride == 0) fail(ErrorCode::invalid_argument, "conv2d: stride must be positive");
  if (wv.shape()[1] != cin || wv.shape()[3] != k || bv.shape() != Shape{cout})
    fail(ErrorCode::shape_mismatch, "conv2d: weight " + shape_str(wv.shape()) + " / bias " +
                                        shape_str(bv.shape()) + " incompatible with input " +
                                        shape_str(xv.shape()));
  if (h + 2 * padding < k || w + 2 * padding < k)
    fail(ErrorCode::shape_mismatch, "conv2d: kernel larger than padded input");
  const std::size_t oh = (h + 2 * padding - k) / stride + 1;
  const std::size_t ow = (w + 2 * padding - k) / stride + 1;
  Tensor out({cout, oh, ow});
  for (std::size_t o = 0; o < cout; ++o) {
    double* dst = out.data() + o * oh * ow;
    std::fill(dst, dst + oh * ow, bv[o]);
    for (std::size_t c = 0; c < cin; ++c) {
      const double* src = xv.data() + c * h * w;
      const double* kern = wv.data() + (o * cin + c) * k * k;
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t ki = 0; ki < k; ++ki) {
            const std::ptrdiff_t si =
                static_cast<std::ptrdiff_t>(i * stride + ki) - static_cast<std::ptrdiff_t>(padding);
            if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kj = 0; kj < k; ++kj) {
              const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j * stride + kj) -
                                        static_cast<std::ptrdiff_t>(padding);
              if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += kern[ki * k + kj] * src[si * w + sj];
            }
          }
          dst[i * ow + j] += acc;
        }
    }
  }
  return tape.record(
      std::move(out), {x, weight, bias},
      [=](const Tape& t, const Tensor& g, std::span<Tensor* const> pg) {
        const Tensor& xv = t.value(x);
        const Tensor& wv = t.value(weight);
        for (std::size_t o = 0; o < cout; ++o) {
          const double* go = g.data() + o * oh * ow;
          if (pg[2]) {
            double gb = 0.0;
            for (std::size_t i = 0; i < oh * ow; ++i) gb += go[i];
            (*pg[2])[o] += gb;
          }
          for (std::size_t c = 0; c < cin; ++c) {
            const double* src = xv.data() + c * h * w;
            const double* kern = wv.data() + (o * cin + c) * k * k;
            double* gx = pg[0] ? pg[0]->data() + c * h * w : nullptr;
            double* gw = pg[1] ? pg[1]->data() + (o * cin + c) * k * k : nullptr;
            for (std::size_t i = 0; i < oh; ++i)
              for (std::size_t j = 0; j < ow; ++j) {
                const double gv = go[i * ow + j];
                for (std::size_t ki = 0; ki < k; ++ki) {
                  const std::ptrdiff_t si = static_cast<std::ptrdiff_t>(i * stride + ki) -
                                            static_cast<std::ptrdiff_t>(padding);
                  if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
                  for (std::size_t kj = 0; kj < k; ++kj) {
                    const std::ptrdiff_t sj = static_cast<std::ptrdiff_t>(j * stride + kj) -
                                              static_cast<std::ptrdiff_t>(padding);
                    if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
                    if (gx) gx[si * w + sj] += kern[ki * k + kj] * gv;
                    if (gw) gw[ki * k + kj] += src[si * w + sj] * gv;
                  }
                }
              }
          }
        }
      });
}

Var layer_norm(Tape& tape, Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = tape.value(x);
  const Tensor& gv = tape.value(gamma);
  const Tensor& bv = tape.value(beta);
  const std::size_t d = xv.shape()[0];
  const std::size_t p = xv.size() / d;
  if (gv.shape() != Shape{d} || bv.shape() != Shape{d})
    fail(ErrorCode::shape_mismatch, "layer_norm: gamma " + shape_str(gv.shape()) + " / beta " +
                                        shape_str(bv.shape()) + " do not match " +
                                        std::to_string(d) + " channels");
  if (!(eps > 0.0)) fail(ErrorCode::invalid_argument, "layer_norm: eps must be positive");

  // Normalized values and per-position inverse deviation are kept for the adjoint.
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(p);
  Tensor out(xv.shape());
  const double inv_d = 1.0 / static_cast<double>(d);
  for (std::size_t q = 0; q < p; ++q) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) mean += xv[c * p + q];
    mean *= inv_d;
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = xv[c * p + q] - mean;
      var += dv * dv;
    }
    var *= inv_d;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[q] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double nh = (xv[c * p + q] - mean) * is;
      (*xhat)[c * p + q] = nh;
      out[c * p + q] = gv[c] * nh + bv[c];
    }
  }
  return tape.record(
      std::move(out), {x, gamma, beta},
      [gamma, d, p, inv_d, xhat, inv_std](const Tape& t, const Tensor& g,
                                          std::span<Tensor* const> pg) {
        const Tensor& gv = t.value(gamma);
        for (std::size_t q = 0; q < p; ++q) {
          double mean_g = 0.0, mean_gx = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double gh = g[c * p + q] * gv[c];
            mean_g += gh;
            mean_gx += gh * (*xhat)[c * p + q];
          }
          mean_g *= inv_d;
          mean_gx *= inv_d;
          for (std::size_t c = 0; c < d; ++c) {
            const double go = g[c * p + q];
            const double nh = (*xhat)[c * p + q];
            if (pg[0])
              (*pg[0])[c * p + q] += (*inv_std)[q] * (go * gv[c] - mean_g - nh * mean_gx);
            if (pg[1]) (*pg[1])[c] += go * nh;
            if (pg[2]) (*pg[2])[c] += go;
          }
        }
      });
}

Var linear(Tape& tape, Var x, Var weight, Var bias) {
  const Tensor& xv = tape.value(x);
  const Tensor& wv = tape.value(weight);
  require_rank(wv, 2, "linear");
  const std::size_t din = xv.shape()[0];
  const std::size_t dout = wv.shape()[1];
  const std::size_t p = xv.size() / din;
  if (wv.shape()[0] != din)
    fail(ErrorCode::shape_mismatch, "linear: weight " + shape_str(wv.shape()) +
                                        " does not accept input " + shape_str(xv.shape()));
  if (bias.valid() && tape.value(bias).shape() != Shape{dout})
    fail(ErrorCode::shape_mismatch, "linear: bias " + shape_str(tape.value(bias).shape()) +
                                        " does not match output width " + std::to_string(dout));
  Shape out_shape = xv.shape();
  out_shape[0] = dout;
  Tensor out(out_shape);
  if (bias.valid()) {
    const Tensor& bv = tape.value(bias);
    for (std::size_t e = 0; e < dout; ++e) std::fill_n(out.data() + e * p, p, bv[e]);
  }
  // out[dout,p] += W^T[dout,din] * x[din,p]
  gemm_acc(wv.data(), xv.data(), out.data(), dout, din, p, true, false);

  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return tape.record(std::move(out), std::move(parents),
                     [x, weight, din, dout, p](const Tape& t, const Tensor& g,
                                               std::span<Tensor* const> pg) {
                       const Tensor& xv = t.value(x);
                       const Tensor& wv = t.value(weight);
                       // dx[din,p] = W[din,dout] * g[dout,p]
                       if (pg[0]) gemm_acc(wv.data(), g.data(), pg[0]->data(), din, dout, p,
                                           false, false);
                       // dW[din,dout] = x[din,p] * g^T[p,dout]
                       if (pg[1]) gemm_acc(xv.data(), g.data(), pg[1]->data(), din, p, dout,
                                           false, true);
                       if (pg.size() > 2 && pg[2])
                         for (std::size_t e = 0; e < dout; ++e) {
                           double s = 0.0;
                           for (std::size_t q = 0; q < p; ++q) s += g[e * p + q];
                           (*pg[2])[e] += s;
                         }
                     });
}

Var gelu(Tape& tape, Var x) {
  Tensor out = tape.value(x);
  for (double& v : out.values()) v = gelu_value(v);
  return tape.record(std::move(out), {x},
                     [x](const Tape& t, const Tensor& g, std::span<Tensor* const> pg) {
                       const Tensor& xv = t.value(x);
                       for (std::size_t i = 0; i < g.size(); ++i)
                         (*pg[0])[i] += g[i] * gelu_slope(xv[i]);
                     });
}

Var softmax(Tape& tape, Var x, std::size_t axis) {
  const Tensor& xv = tape.value(x);
  if (axis >= xv.rank())
    fail(ErrorCode::invalid_argument, "softmax: axis out of range for " + shape_str(xv.shape()));
  const std::size_t outer = prod(xv.shape(), 0, axis);
  const std::size_t n = xv.shape()[axis];
  const std::size_t inner = prod(xv.shape(), axis + 1, xv.rank());
  Tensor out(xv.shape());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * n * inner + i;
      double mx = xv[base];
      for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < n; ++j) out[base + j * inner] /= z;
    }
  auto y = std::make_shared<Tensor>(out);
  return tape.record(std::move(out), {x},
                     [y, outer, n, inner](const Tape&, const Tensor& g,
                                          std::span<Tensor* const> pg) {
                       for (std::size_t o = 0; o < outer; ++o)
                         for (std::size_t i = 0; i < inner; ++i) {
                           const std::size_t base = o * n * inner + i;
                           double dot = 0.0;
                           for (std::size_t j = 0; j < n; ++j)
                             dot += g[base + j * inner] * (*y)[base + j * inner];
                           for (std::size_t j = 0; j < n; ++j) {
                             const std::size_t q = base + j * inner;
                             (*pg[0])[q] += (*y)[q] * (g[q] - dot);
                           }
                         }
                     });
}

Var avg_pool3x3(Tape& tape, Var x) {
  const Tensor& xv = tape.value(x);
  require_rank(xv, 3, "avg_pool3x3");
  const std::size_t d = xv.shape()[0], h = xv.shape()[1], w = xv.shape()[2];
  const auto window = [h, w](std::size_t i, std::size_t j, auto&& visit) {
    for (std::size_t si = (i == 0 ? 0 : i - 1); si <= std::min(i + 1, h - 1); ++si)
      for (std::size_t sj = (j == 0 ? 0 : j - 1); sj <= std::min(j + 1, w - 1); ++sj)
        visit(si * w + sj);
  };
  Tensor out(xv.shape());
  for (std::size_t c = 0; c < d; ++c) {
    const double* src = xv.data() + c * h * w;
    double* dst = out.data() + c * h * w;
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        double acc = 0.0;
        window(i, j, [&](std::size_t q) { acc += src[q]; });
        dst[i * w + j] = acc / 9.0;
      }
  }
  return tape.record(std::move(out), {x},
                     [d, h, w, window](const Tape&, const Tensor& g,
                                       std::span<Tensor* const> pg) {
                       for (std::size_t c = 0; c < d; ++c) {
                         double* gx = pg[0]->data() + c * h * w;
                         const double* gc = g.data() + c * h * w;
                         for (std::size_t i = 0; i < h; ++i)
                           for (std::size_t j = 0; j < w; ++j) {
                             const double gv = gc[i * w + j] / 9.0;
                             window(i, j, [&](std::size_t q) { gx[q] += gv; });
                           }
                       }
                     });
}

Var cross_entropy(Tape& tape, Var logits, std::size_t label) {
  const Tensor& z = tape.value(logits);
  require_rank(z, 1, "cross_entropy");
  if (label >= z.size())
    fail(ErrorCode::invalid_argument, "cross_entropy: label " + std::to_string(label) +
                                          " out of range for " + std::to_string(z.size()) +
                                          " classes");
  const double mx = *std::max_element(z.values().begin(), z.values().end());
  double s = 0.0;
  for (double v : z.values()) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  return tape.record(Tensor::scalar(lse - z[label]), {logits},
                     [logits, label, lse](const Tape& t, const Tensor& g,
                                          std::span<Tensor* const> pg) {
                       const Tensor& z = t.value(logits);
                       for (std::size_t i = 0; i < z.size(); ++i) {
                         const double p = std::exp(z[i] - lse);
                         (*pg[0])[i] += g[0] * (p - (i == label ? 1.0 : 0.0));
                       }
                     });
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double eps) {
  if (!(eps > 0.0)) fail(ErrorCode::invalid_argument, "finite_diff_grad: eps must be positive");
  Tensor grad(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down))
      fail(ErrorCode::invalid_argument,
           "finite_diff_grad: function is not finite near coordinate " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

}  // namespace potter
