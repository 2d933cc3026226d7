#include "gir/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace gir {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

void check_axis(const Tensor& a, std::size_t axis, const char* op) {
  if (axis >= a.rank())
    throw std::invalid_argument(std::string(op) + ": axis " +
                                std::to_string(axis) + " out of range for " +
                                shape_str(a.shape()));
}

struct SliceDims {
  std::size_t outer, len, inner;
};

SliceDims slice_dims(const Shape& s, std::size_t axis) {
  SliceDims d{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) d.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) d.inner *= s[i];
  return d;
}

void accumulate(Tensor t, const std::vector<double>& g) {
  auto& dst = t.grad();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

}  // namespace

namespace detail {

Tensor make_op(Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(Node&)> backward_fn) {
  bool rec = false;
  for (const auto& p : parents) rec = rec || p.requires_grad();
  Tensor out(std::move(shape), std::move(data));
  if (rec) {
    auto n = out.node();
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward_fn = std::move(backward_fn);
  }
  return out;
}

}  // namespace detail

using detail::make_op;
using detail::Node;

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] + b[i];
  return make_op(a.shape(), std::move(d), {a, b}, [a, b](Node& out) mutable {
    if (a.requires_grad()) accumulate(a, out.grad);
    if (b.requires_grad()) accumulate(b, out.grad);
  });
}

Tensor add(const Tensor& a, double s) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] + s;
  return make_op(a.shape(), std::move(d), {a}, [a](Node& out) mutable {
    if (a.requires_grad()) accumulate(a, out.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] - b[i];
  return make_op(a.shape(), std::move(d), {a, b}, [a, b](Node& out) mutable {
    if (a.requires_grad()) accumulate(a, out.grad);
    if (b.requires_grad()) {
      auto& g = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= out.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] * b[i];
  return make_op(a.shape(), std::move(d), {a, b}, [a, b](Node& out) mutable {
    if (a.requires_grad()) {
      auto& g = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * b[i];
    }
    if (b.requires_grad()) {
      auto& g = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * a[i];
    }
  });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a[i] * s;
  return make_op(a.shape(), std::move(d), {a}, [a, s](Node& out) mutable {
    if (a.requires_grad()) {
      auto& g = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * s;
    }
  });
}

Tensor abs_val(const Tensor& a) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::fabs(a[i]);
  return make_op(a.shape(), std::move(d), {a}, [a](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double s = a[i] > 0.0 ? 1.0 : (a[i] < 0.0 ? -1.0 : 0.0);
      g[i] += out.grad[i] * s;
    }
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = 1.0 / (1.0 + std::exp(-a[i]));
  return make_op(a.shape(), std::move(d), {a}, [a](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double y = out.data[i];
      g[i] += out.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor gelu(const Tensor& a) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = 0.5 * a[i] * (1.0 + std::erf(a[i] * kInvSqrt2));
  return make_op(a.shape(), std::move(d), {a}, [a](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      double x = a[i];
      double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      g[i] += out.grad[i] * (cdf + x * pdf);
    }
  });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: expects 2-D operands, got " +
                                shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                shape_str(a.shape()) + " x " +
                                shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> d(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) d[i * n + j] += av * b[p * n + j];
    }
  return make_op({m, n}, std::move(d), {a, b},
                 [a, b, m, k, n](Node& out) mutable {
                   if (a.requires_grad()) {
                     auto& ga = a.grad();
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < n; ++j) {
                         const double gv = out.grad[i * n + j];
                         for (std::size_t p = 0; p < k; ++p)
                           ga[i * k + p] += gv * b[p * n + j];
                       }
                   }
                   if (b.requires_grad()) {
                     auto& gb = b.grad();
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t p = 0; p < k; ++p) {
                         const double av = a[i * k + p];
                         for (std::size_t j = 0; j < n; ++j)
                           gb[p * n + j] += av * out.grad[i * n + j];
                       }
                   }
                 });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2)
    throw std::invalid_argument("transpose: expects 2-D, got " +
                                shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> d(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) d[j * m + i] = a[i * n + j];
  return make_op({n, m}, std::move(d), {a}, [a, m, n](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += out.grad[j * m + i];
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return make_op({1}, {s}, {a}, [a](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / a.size()); }

// ---------------------------------------------------------------------------
// Normalizations

Tensor softmax(const Tensor& a, std::size_t axis) {
  check_axis(a, axis, "softmax");
  const auto sd = slice_dims(a.shape(), axis);
  std::vector<double> d(a.size());
  for (std::size_t o = 0; o < sd.outer; ++o)
    for (std::size_t in = 0; in < sd.inner; ++in) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < sd.len; ++i)
        mx = std::max(mx, a[(o * sd.len + i) * sd.inner + in]);
      double z = 0.0;
      for (std::size_t i = 0; i < sd.len; ++i) {
        const std::size_t idx = (o * sd.len + i) * sd.inner + in;
        d[idx] = std::exp(a[idx] - mx);
        z += d[idx];
      }
      for (std::size_t i = 0; i < sd.len; ++i)
        d[(o * sd.len + i) * sd.inner + in] /= z;
    }
  return make_op(a.shape(), std::move(d), {a}, [a, sd](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t o = 0; o < sd.outer; ++o)
      for (std::size_t in = 0; in < sd.inner; ++in) {
        double dot = 0.0;
        for (std::size_t i = 0; i < sd.len; ++i) {
          const std::size_t idx = (o * sd.len + i) * sd.inner + in;
          dot += out.data[idx] * out.grad[idx];
        }
        for (std::size_t i = 0; i < sd.len; ++i) {
          const std::size_t idx = (o * sd.len + i) * sd.inner + in;
          g[idx] += out.data[idx] * (out.grad[idx] - dot);
        }
      }
  });
}

Tensor layer_norm(const Tensor& a, std::size_t axis, const Tensor& gamma,
                  const Tensor& beta) {
  check_axis(a, axis, "layer_norm");
  if (gamma.size() != a.dim(axis) || beta.size() != a.dim(axis))
    throw std::invalid_argument(
        "layer_norm: affine parameters must have length " +
        std::to_string(a.dim(axis)));
  constexpr double eps = 1e-8;
  const auto sd = slice_dims(a.shape(), axis);
  std::vector<double> d(a.size());
  auto xhat = std::make_shared<std::vector<double>>(a.size());
  auto inv_std = std::make_shared<std::vector<double>>(sd.outer * sd.inner);
  for (std::size_t o = 0; o < sd.outer; ++o)
    for (std::size_t in = 0; in < sd.inner; ++in) {
      double m = 0.0;
      for (std::size_t i = 0; i < sd.len; ++i)
        m += a[(o * sd.len + i) * sd.inner + in];
      m /= static_cast<double>(sd.len);
      double v = 0.0;
      for (std::size_t i = 0; i < sd.len; ++i) {
        const double c = a[(o * sd.len + i) * sd.inner + in] - m;
        v += c * c;
      }
      v /= static_cast<double>(sd.len);
      const double is = 1.0 / std::sqrt(v + eps);
      (*inv_std)[o * sd.inner + in] = is;
      for (std::size_t i = 0; i < sd.len; ++i) {
        const std::size_t idx = (o * sd.len + i) * sd.inner + in;
        (*xhat)[idx] = (a[idx] - m) * is;
        d[idx] = gamma[i] * (*xhat)[idx] + beta[i];
      }
    }
  return make_op(
      a.shape(), std::move(d), {a, gamma, beta},
      [a, gamma, beta, sd, xhat, inv_std](Node& out) mutable {
        const double n = static_cast<double>(sd.len);
        for (std::size_t o = 0; o < sd.outer; ++o)
          for (std::size_t in = 0; in < sd.inner; ++in) {
            double sum_gh = 0.0, sum_ghx = 0.0;
            for (std::size_t i = 0; i < sd.len; ++i) {
              const std::size_t idx = (o * sd.len + i) * sd.inner + in;
              const double gh = out.grad[idx] * gamma[i];
              sum_gh += gh;
              sum_ghx += gh * (*xhat)[idx];
            }
            if (a.requires_grad()) {
              auto& g = a.grad();
              const double is = (*inv_std)[o * sd.inner + in];
              for (std::size_t i = 0; i < sd.len; ++i) {
                const std::size_t idx = (o * sd.len + i) * sd.inner + in;
                const double gh = out.grad[idx] * gamma[i];
                g[idx] +=
                    is * (gh - sum_gh / n - (*xhat)[idx] * sum_ghx / n);
              }
            }
          }
        if (gamma.requires_grad() || beta.requires_grad()) {
          auto& gg = gamma.grad();
          auto& gb = beta.grad();
          for (std::size_t o = 0; o < sd.outer; ++o)
            for (std::size_t i = 0; i < sd.len; ++i)
              for (std::size_t in = 0; in < sd.inner; ++in) {
                const std::size_t idx = (o * sd.len + i) * sd.inner + in;
                if (gamma.requires_grad())
                  gg[i] += out.grad[idx] * (*xhat)[idx];
                if (beta.requires_grad()) gb[i] += out.grad[idx];
              }
        }
      });
}

// ---------------------------------------------------------------------------
// Shape surgery

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.size())
    throw std::invalid_argument("reshape: cannot view " +
                                shape_str(a.shape()) + " as " +
                                shape_str(shape));
  return make_op(std::move(shape), a.data(), {a}, [a](Node& out) mutable {
    if (a.requires_grad()) accumulate(a, out.grad);
  });
}

Tensor concat(std::span<const Tensor> ts, std::size_t axis) {
  if (ts.empty()) throw std::invalid_argument("concat: no inputs");
  check_axis(ts[0], axis, "concat");
  Shape shape = ts[0].shape();
  std::size_t total = 0;
  for (const auto& t : ts) {
    if (t.rank() != shape.size())
      throw std::invalid_argument("concat: rank mismatch");
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (i != axis && t.dim(i) != shape[i])
        throw std::invalid_argument("concat: shape mismatch " +
                                    shape_str(t.shape()) + " vs " +
                                    shape_str(shape) + " on axis " +
                                    std::to_string(axis));
    total += t.dim(axis);
  }
  shape[axis] = total;
  const auto sd = slice_dims(shape, axis);
  std::vector<double> d(shape_numel(shape));
  std::vector<std::size_t> lens;
  std::size_t off = 0;
  for (const auto& t : ts) {
    const std::size_t len = t.dim(axis);
    lens.push_back(len);
    for (std::size_t o = 0; o < sd.outer; ++o)
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t in = 0; in < sd.inner; ++in)
          d[(o * total + off + i) * sd.inner + in] =
              t[(o * len + i) * sd.inner + in];
    off += len;
  }
  std::vector<Tensor> parents(ts.begin(), ts.end());
  return make_op(shape, std::move(d), parents,
                 [parents, lens, sd, total](Node& out) mutable {
                   std::size_t off = 0;
                   for (std::size_t pi = 0; pi < parents.size(); ++pi) {
                     const std::size_t len = lens[pi];
                     if (parents[pi].requires_grad()) {
                       auto& g = parents[pi].grad();
                       for (std::size_t o = 0; o < sd.outer; ++o)
                         for (std::size_t i = 0; i < len; ++i)
                           for (std::size_t in = 0; in < sd.inner; ++in)
                             g[(o * len + i) * sd.inner + in] +=
                                 out.grad[(o * total + off + i) * sd.inner +
                                          in];
                     }
                     off += len;
                   }
                 });
}

Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) {
  const Tensor ts[] = {a, b};
  return concat(std::span<const Tensor>(ts, 2), axis);
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start,
             std::size_t len) {
  check_axis(a, axis, "slice");
  if (start + len > a.dim(axis))
    throw std::invalid_argument("slice: range [" + std::to_string(start) +
                                "," + std::to_string(start + len) +
                                ") exceeds axis extent " +
                                std::to_string(a.dim(axis)));
  Shape shape = a.shape();
  const std::size_t full = shape[axis];
  shape[axis] = len;
  const auto sd = slice_dims(shape, axis);
  std::vector<double> d(shape_numel(shape));
  for (std::size_t o = 0; o < sd.outer; ++o)
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t in = 0; in < sd.inner; ++in)
        d[(o * len + i) * sd.inner + in] =
            a[(o * full + start + i) * sd.inner + in];
  return make_op(shape, std::move(d), {a},
                 [a, sd, full, start, len](Node& out) mutable {
                   if (!a.requires_grad()) return;
                   auto& g = a.grad();
                   for (std::size_t o = 0; o < sd.outer; ++o)
                     for (std::size_t i = 0; i < len; ++i)
                       for (std::size_t in = 0; in < sd.inner; ++in)
                         g[(o * full + start + i) * sd.inner + in] +=
                             out.grad[(o * len + i) * sd.inner + in];
                 });
}

// ---------------------------------------------------------------------------
// Image ops

namespace {

void check_chw(const Tensor& a, const char* op) {
  if (a.rank() != 3)
    throw std::invalid_argument(std::string(op) + ": expects [C,H,W], got " +
                                shape_str(a.shape()));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              PaddingMode padding) {
  check_chw(input, "conv2d");
  if (weight.rank() != 4)
    throw std::invalid_argument("conv2d: weight must be [Cout,Cin,k,k], got " +
                                shape_str(weight.shape()));
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  if (weight.dim(1) != cin)
    throw std::invalid_argument("conv2d: channel mismatch, input has " +
                                std::to_string(cin) + ", weight expects " +
                                std::to_string(weight.dim(1)));
  if (weight.dim(3) != k || k % 2 == 0)
    throw std::invalid_argument("conv2d: kernel must be square with odd size, got " +
                                shape_str(weight.shape()));
  if (bias.size() != cout)
    throw std::invalid_argument("conv2d: bias length " +
                                std::to_string(bias.size()) +
                                " != out channels " + std::to_string(cout));
  const long pad = static_cast<long>(k / 2);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  const bool rep = padding == PaddingMode::Replicate;

  std::vector<double> d(cout * h * w);
  for (std::size_t o = 0; o < cout; ++o)
    for (long i = 0; i < lh; ++i)
      for (long j = 0; j < lw; ++j) {
        double acc = bias[o];
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t u = 0; u < k; ++u)
            for (std::size_t v = 0; v < k; ++v) {
              long si = i + static_cast<long>(u) - pad;
              long sj = j + static_cast<long>(v) - pad;
              if (rep) {
                si = std::clamp(si, 0L, lh - 1);
                sj = std::clamp(sj, 0L, lw - 1);
              } else if (si < 0 || si >= lh || sj < 0 || sj >= lw) {
                continue;
              }
              acc += input[(c * h + si) * w + sj] *
                     weight[((o * cin + c) * k + u) * k + v];
            }
        d[(o * h + i) * w + j] = acc;
      }
  return make_op(
      {cout, h, w}, std::move(d), {input, weight, bias},
      [input, weight, bias, cin, cout, h, w, k, pad, rep](Node& out) mutable {
        const long lh = static_cast<long>(h), lw = static_cast<long>(w);
        for (std::size_t o = 0; o < cout; ++o)
          for (long i = 0; i < lh; ++i)
            for (long j = 0; j < lw; ++j) {
              const double go = out.grad[(o * h + i) * w + j];
              if (go == 0.0) continue;
              if (bias.requires_grad()) bias.grad()[o] += go;
              for (std::size_t c = 0; c < cin; ++c)
                for (std::size_t u = 0; u < k; ++u)
                  for (std::size_t v = 0; v < k; ++v) {
                    long si = i + static_cast<long>(u) - pad;
                    long sj = j + static_cast<long>(v) - pad;
                    if (rep) {
                      si = std::clamp(si, 0L, lh - 1);
                      sj = std::clamp(sj, 0L, lw - 1);
                    } else if (si < 0 || si >= lh || sj < 0 || sj >= lw) {
                      continue;
                    }
                    const std::size_t in_idx = (c * h + si) * w + sj;
                    const std::size_t w_idx = ((o * cin + c) * k + u) * k + v;
                    if (weight.requires_grad())
                      weight.grad()[w_idx] += go * input[in_idx];
                    if (input.requires_grad())
                      input.grad()[in_idx] += go * weight[w_idx];
                  }
            }
      });
}

Tensor avg_pool2(const Tensor& a) {
  check_chw(a, "avg_pool2");
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  if (h == 0 || w == 0) throw std::invalid_argument("avg_pool2: empty image");
  const std::size_t h2 = (h + 1) / 2, w2 = (w + 1) / 2;
  std::vector<double> d(c * h2 * w2);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j) {
        double acc = 0.0;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t si = std::min(2 * i + di, h - 1);
            const std::size_t sj = std::min(2 * j + dj, w - 1);
            acc += a[(ch * h + si) * w + sj];
          }
        d[(ch * h2 + i) * w2 + j] = 0.25 * acc;
      }
  return make_op({c, h2, w2}, std::move(d), {a},
                 [a, c, h, w, h2, w2](Node& out) mutable {
                   if (!a.requires_grad()) return;
                   auto& g = a.grad();
                   for (std::size_t ch = 0; ch < c; ++ch)
                     for (std::size_t i = 0; i < h2; ++i)
                       for (std::size_t j = 0; j < w2; ++j) {
                         const double go =
                             0.25 * out.grad[(ch * h2 + i) * w2 + j];
                         for (std::size_t di = 0; di < 2; ++di)
                           for (std::size_t dj = 0; dj < 2; ++dj) {
                             const std::size_t si = std::min(2 * i + di, h - 1);
                             const std::size_t sj = std::min(2 * j + dj, w - 1);
                             g[(ch * h + si) * w + sj] += go;
                           }
                       }
                 });
}

Tensor nearest_upsample2(const Tensor& a) {
  check_chw(a, "nearest_upsample2");
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const std::size_t h2 = 2 * h, w2 = 2 * w;
  std::vector<double> d(c * h2 * w2);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j)
        d[(ch * h2 + i) * w2 + j] = a[(ch * h + i / 2) * w + j / 2];
  return make_op({c, h2, w2}, std::move(d), {a},
                 [a, c, h, w, h2, w2](Node& out) mutable {
                   if (!a.requires_grad()) return;
                   auto& g = a.grad();
                   for (std::size_t ch = 0; ch < c; ++ch)
                     for (std::size_t i = 0; i < h2; ++i)
                       for (std::size_t j = 0; j < w2; ++j)
                         g[(ch * h + i / 2) * w + j / 2] +=
                             out.grad[(ch * h2 + i) * w2 + j];
                 });
}

Tensor chw_to_tokens(const Tensor& a) {
  check_chw(a, "chw_to_tokens");
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2), n = h * w;
  std::vector<double> d(n * c);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < n; ++p) d[p * c + ch] = a[ch * n + p];
  return make_op({n, c}, std::move(d), {a}, [a, c, n](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < n; ++p) g[ch * n + p] += out.grad[p * c + ch];
  });
}

Tensor tokens_to_chw(const Tensor& a, std::size_t h, std::size_t w) {
  if (a.rank() != 2 || a.dim(0) != h * w)
    throw std::invalid_argument("tokens_to_chw: expects [" +
                                std::to_string(h * w) + ",C], got " +
                                shape_str(a.shape()));
  const std::size_t n = h * w, c = a.dim(1);
  std::vector<double> d(c * n);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < n; ++p) d[ch * n + p] = a[p * c + ch];
  return make_op({c, h, w}, std::move(d), {a}, [a, c, n](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < n; ++p) g[p * c + ch] += out.grad[ch * n + p];
  });
}

Tensor global_avg_pool(const Tensor& a) {
  check_chw(a, "global_avg_pool");
  const std::size_t c = a.dim(0), n = a.dim(1) * a.dim(2);
  std::vector<double> d(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t p = 0; p < n; ++p) d[ch] += a[ch * n + p];
    d[ch] /= static_cast<double>(n);
  }
  return make_op({c}, std::move(d), {a}, [a, c, n](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double go = out.grad[ch] / static_cast<double>(n);
      for (std::size_t p = 0; p < n; ++p) g[ch * n + p] += go;
    }
  });
}

Tensor channel_mean(const Tensor& a) {
  check_chw(a, "channel_mean");
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2), n = h * w;
  std::vector<double> d(n, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < n; ++p) d[p] += a[ch * n + p];
  for (std::size_t p = 0; p < n; ++p) d[p] /= static_cast<double>(c);
  return make_op({h, w}, std::move(d), {a}, [a, c, n](Node& out) mutable {
    if (!a.requires_grad()) return;
    auto& g = a.grad();
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t p = 0; p < n; ++p)
        g[ch * n + p] += out.grad[p] / static_cast<double>(c);
  });
}

Tensor channel_scale(const Tensor& a, const Tensor& s) {
  check_chw(a, "channel_scale");
  if (s.size() != a.dim(0))
    throw std::invalid_argument("channel_scale: gate length " +
                                std::to_string(s.size()) + " != channels " +
                                std::to_string(a.dim(0)));
  const std::size_t c = a.dim(0), n = a.dim(1) * a.dim(2);
  std::vector<double> d(a.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < n; ++p) d[ch * n + p] = a[ch * n + p] * s[ch];
  return make_op(a.shape(), std::move(d), {a, s}, [a, s, c, n](Node& out) mutable {
    if (a.requires_grad()) {
      auto& g = a.grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < n; ++p)
          g[ch * n + p] += out.grad[ch * n + p] * s[ch];
    }
    if (s.requires_grad()) {
      auto& g = s.grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < n; ++p)
          g[ch] += out.grad[ch * n + p] * a[ch * n + p];
    }
  });
}

Tensor spatial_scale(const Tensor& a, const Tensor& m) {
  check_chw(a, "spatial_scale");
  if (m.rank() != 2 || m.dim(0) != a.dim(1) || m.dim(1) != a.dim(2))
    throw std::invalid_argument("spatial_scale: gate " + shape_str(m.shape()) +
                                " does not match image " +
                                shape_str(a.shape()));
  const std::size_t c = a.dim(0), n = a.dim(1) * a.dim(2);
  std::vector<double> d(a.size());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t p = 0; p < n; ++p) d[ch * n + p] = a[ch * n + p] * m[p];
  return make_op(a.shape(), std::move(d), {a, m}, [a, m, c, n](Node& out) mutable {
    if (a.requires_grad()) {
      auto& g = a.grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < n; ++p)
          g[ch * n + p] += out.grad[ch * n + p] * m[p];
    }
    if (m.requires_grad()) {
      auto& g = m.grad();
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t p = 0; p < n; ++p)
          g[p] += out.grad[ch * n + p] * a[ch * n + p];
    }
  });
}

// ---------------------------------------------------------------------------
// Attention

namespace {

struct AttnSaved {
  std::vector<double> q, k, v;          // projected tokens
  std::vector<std::vector<double>> att;  // per-query weights over its window
};

void check_attention_args(const Tensor& x, const Tensor& y, const Tensor& wq,
                          const Tensor& wk, const Tensor* wv, std::size_t h,
                          std::size_t w, std::size_t window) {
  if (x.rank() != 2 || y.rank() != 2)
    throw std::invalid_argument("attention: tokens must be 2-D [N,C]");
  if (x.dim(0) != y.dim(0))
    throw std::invalid_argument("attention: token counts differ: " +
                                shape_str(x.shape()) + " vs " +
                                shape_str(y.shape()));
  if (x.dim(0) != h * w)
    throw std::invalid_argument("attention: token count " +
                                std::to_string(x.dim(0)) +
                                " != h*w = " + std::to_string(h * w));
  if (window % 2 == 0 || window == 0)
    throw std::invalid_argument("attention: window must be odd and positive");
  if (wq.rank() != 2 || wk.rank() != 2 || wq.dim(0) != x.dim(1) ||
      wk.dim(0) != y.dim(1) || wq.dim(1) != wk.dim(1))
    throw std::invalid_argument(
        "attention: projection width mismatch, wq " + shape_str(wq.shape()) +
        " wk " + shape_str(wk.shape()) + " for tokens " +
        shape_str(x.shape()) + " / " + shape_str(y.shape()));
  if (wv && (wv->rank() != 2 || wv->dim(0) != y.dim(1)))
    throw std::invalid_argument("attention: wv " + shape_str(wv->shape()) +
                                " incompatible with y " +
                                shape_str(y.shape()));
}

// Window row/col bounds for the query pixel, clamped to the image.
inline void window_bounds(std::size_t q, std::size_t h, std::size_t w,
                          std::size_t window, std::size_t& r0, std::size_t& r1,
                          std::size_t& c0, std::size_t& c1) {
  const std::size_t half = window / 2;
  const std::size_t r = q / w, c = q % w;
  r0 = r > half ? r - half : 0;
  c0 = c > half ? c - half : 0;
  r1 = std::min(h - 1, r + half);
  c1 = std::min(w - 1, c + half);
}

void project(const Tensor& t, const Tensor& wt, std::vector<double>& out) {
  const std::size_t n = t.dim(0), c = t.dim(1), d = wt.dim(1);
  out.assign(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < c; ++p) {
      const double v = t[i * c + p];
      if (v == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] += v * wt[p * d + j];
    }
}

}  // namespace

Tensor neighborhood_attention(const Tensor& x, const Tensor& y,
                              const Tensor& wq, const Tensor& wk,
                              const Tensor& wv, std::size_t h, std::size_t w,
                              std::size_t window) {
  check_attention_args(x, y, wq, wk, &wv, h, w, window);
  const std::size_t n = x.dim(0);
  const std::size_t dk = wq.dim(1), dv = wv.dim(1);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dk));

  auto saved = std::make_shared<AttnSaved>();
  project(x, wq, saved->q);
  project(y, wk, saved->k);
  project(y, wv, saved->v);
  saved->att.resize(n);

  std::vector<double> out(n * dv, 0.0);
  std::vector<double> logits;
  for (std::size_t qi = 0; qi < n; ++qi) {
    std::size_t r0, r1, c0, c1;
    window_bounds(qi, h, w, window, r0, r1, c0, c1);
    logits.clear();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c) {
        const std::size_t kj = r * w + c;
        double l = 0.0;
        for (std::size_t p = 0; p < dk; ++p)
          l += saved->q[qi * dk + p] * saved->k[kj * dk + p];
        l *= inv_sqrt_d;
        logits.push_back(l);
        mx = std::max(mx, l);
      }
    double z = 0.0;
    for (auto& l : logits) {
      l = std::exp(l - mx);
      z += l;
    }
    auto& a = saved->att[qi];
    a.resize(logits.size());
    std::size_t idx = 0;
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c, ++idx) {
        const std::size_t kj = r * w + c;
        a[idx] = logits[idx] / z;
        for (std::size_t p = 0; p < dv; ++p)
          out[qi * dv + p] += a[idx] * saved->v[kj * dv + p];
      }
  }

  return make_op(
      {n, dv}, std::move(out), {x, y, wq, wk, wv},
      [x, y, wq, wk, wv, saved, h, w, window, n, dk, dv,
       inv_sqrt_d](Node& outn) mutable {
        const std::size_t cx = x.dim(1), cy = y.dim(1);
        std::vector<double> dq(n * dk, 0.0), dkv(n * dk, 0.0),
            dvv(n * dv, 0.0);
        std::vector<double> dl;
        for (std::size_t qi = 0; qi < n; ++qi) {
          std::size_t r0, r1, c0, c1;
          window_bounds(qi, h, w, window, r0, r1, c0, c1);
          const auto& a = saved->att[qi];
          dl.assign(a.size(), 0.0);
          double dot = 0.0;
          std::size_t idx = 0;
          for (std::size_t r = r0; r <= r1; ++r)
            for (std::size_t c = c0; c <= c1; ++c, ++idx) {
              const std::size_t kj = r * w + c;
              double da = 0.0;
              for (std::size_t p = 0; p < dv; ++p) {
                const double g = outn.grad[qi * dv + p];
                da += g * saved->v[kj * dv + p];
                dvv[kj * dv + p] += a[idx] * g;
              }
              dl[idx] = da;
              dot += a[idx] * da;
            }
          idx = 0;
          for (std::size_t r = r0; r <= r1; ++r)
            for (std::size_t c = c0; c <= c1; ++c, ++idx) {
              const std::size_t kj = r * w + c;
              const double dli = a[idx] * (dl[idx] - dot) * inv_sqrt_d;
              if (dli == 0.0) continue;
              for (std::size_t p = 0; p < dk; ++p) {
                dq[qi * dk + p] += dli * saved->k[kj * dk + p];
                dkv[kj * dk + p] += dli * saved->q[qi * dk + p];
              }
            }
        }
        // Push the projected-token grads through the linear maps.
        if (x.requires_grad()) {
          auto& g = x.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < cx; ++p)
              for (std::size_t j = 0; j < dk; ++j)
                g[i * cx + p] += dq[i * dk + j] * wq[p * dk + j];
        }
        if (wq.requires_grad()) {
          auto& g = wq.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < cx; ++p)
              for (std::size_t j = 0; j < dk; ++j)
                g[p * dk + j] += x[i * cx + p] * dq[i * dk + j];
        }
        if (y.requires_grad()) {
          auto& g = y.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < cy; ++p) {
              double acc = 0.0;
              for (std::size_t j = 0; j < dk; ++j)
                acc += dkv[i * dk + j] * wk[p * dk + j];
              for (std::size_t j = 0; j < dv; ++j)
                acc += dvv[i * dv + j] * wv[p * dv + j];
              g[i * cy + p] += acc;
            }
        }
        if (wk.requires_grad()) {
          auto& g = wk.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < cy; ++p)
              for (std::size_t j = 0; j < dk; ++j)
                g[p * dk + j] += y[i * cy + p] * dkv[i * dk + j];
        }
        if (wv.requires_grad()) {
          auto& g = wv.grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t p = 0; p < cy; ++p)
              for (std::size_t j = 0; j < dv; ++j)
                g[p * dv + j] += y[i * cy + p] * dvv[i * dv + j];
        }
      });
}

Tensor attention_matrix(const Tensor& x, const Tensor& y, const Tensor& wq,
                        const Tensor& wk, std::size_t h, std::size_t w,
                        std::size_t window) {
  check_attention_args(x, y, wq, wk, nullptr, h, w, window);
  const std::size_t n = x.dim(0), dk = wq.dim(1);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<double> q, k;
  project(x, wq, q);
  project(y, wk, k);
  Tensor a({n, n}, 0.0);
  std::vector<double> logits;
  for (std::size_t qi = 0; qi < n; ++qi) {
    std::size_t r0, r1, c0, c1;
    window_bounds(qi, h, w, window, r0, r1, c0, c1);
    logits.clear();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c) {
        const std::size_t kj = r * w + c;
        double l = 0.0;
        for (std::size_t p = 0; p < dk; ++p)
          l += q[qi * dk + p] * k[kj * dk + p];
        logits.push_back(l * inv_sqrt_d);
        mx = std::max(mx, logits.back());
      }
    double z = 0.0;
    for (auto& l : logits) {
      l = std::exp(l - mx);
      z += l;
    }
    std::size_t idx = 0;
    for (std::size_t r = r0; r <= r1; ++r)
      for (std::size_t c = c0; c <= c1; ++c, ++idx)
        a.at(qi, r * w + c) = logits[idx] / z;
  }
  return a;
}

}  // namespace gir
