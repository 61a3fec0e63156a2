#include "cta/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cta/errors.hpp"
#include "op_support.hpp"

namespace cta {

using detail::grad_of;
using detail::make_result;
using detail::record;
using detail::tracking;

namespace {

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (!t.defined() || t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " +
                         (t.defined() ? shape_str(t.shape()) : std::string("<undefined>")));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void require_single(const Tensor& s, const char* op) {
  if (s.numel() != 1) {
    throw DimensionError(std::string(op) + ": expected one-element tensor, got " +
                         shape_str(s.shape()));
  }
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(const Shape& shape, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != axis) out.push_back(shape[i]);
  }
  if (out.empty()) out.push_back(1);
  return out;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- linear algebra -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " * " + shape_str(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  Tensor result = make_result({m, n}, std::move(out));
  if (tracking({&a, &b})) {
    record("matmul", {&a, &b}, result,
           [an = a.node().get(), bn = b.node().get(), on = result.node().get(), m, k, n] {
             const double* g = on->grad.data();
             if (double* ga = grad_of(an)) {
               // ga += g * b^T
               const double* pb = bn->value.data();
               for (std::size_t i = 0; i < m; ++i) {
                 for (std::size_t p = 0; p < k; ++p) {
                   double acc = 0.0;
                   const double* brow = pb + p * n;
                   const double* grow = g + i * n;
                   for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                   ga[i * k + p] += acc;
                 }
               }
             }
             if (double* gb = grad_of(bn)) {
               // gb += a^T * g
               const double* pa = an->value.data();
               for (std::size_t i = 0; i < m; ++i) {
                 for (std::size_t p = 0; p < k; ++p) {
                   const double av = pa[i * k + p];
                   double* gbrow = gb + p * n;
                   const double* grow = g + i * n;
                   for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
                 }
               }
             }
           });
  }
  return result;
}

Tensor matvec(const Tensor& a, const Tensor& x) {
  require_rank(x, 1, "matvec");
  return reshape(matmul(a, reshape(x, {x.numel(), 1})), {a.dim(0)});
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  Tensor result = make_result({n, m}, std::move(out));
  if (tracking({&a})) {
    record("transpose", {&a}, result, [an = a.node().get(), on = result.node().get(), m, n] {
      if (double* ga = grad_of(an)) {
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += on->grad[j * m + i];
      }
    });
  }
  return result;
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, cout, kh, kw, stride, pad, oh, ow;

  // Output columns ox whose input column ox*stride + kx - pad lies in [0, w).
  void column_range(std::size_t kx, std::size_t& lo, std::size_t& hi) const {
    const long off = static_cast<long>(kx) - static_cast<long>(pad);
    long first = 0;
    if (off < 0) first = (-off + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    long last = (static_cast<long>(w) - 1 - off);
    last = last < 0 ? -1 : last / static_cast<long>(stride);
    last = std::min<long>(last, static_cast<long>(ow) - 1);
    lo = static_cast<std::size_t>(first);
    hi = last < first ? lo : static_cast<std::size_t>(last + 1);
  }
};

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              std::size_t stride, std::size_t padding) {
  require_rank(input, 3, "conv2d");
  require_rank(kernels, 4, "conv2d");
  if (stride < 1) throw ContractError("conv2d: stride must be >= 1");
  ConvGeometry g{};
  g.cin = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.cout = kernels.dim(0);
  g.kh = kernels.dim(2);
  g.kw = kernels.dim(3);
  g.stride = stride;
  g.pad = padding;
  if (kernels.dim(1) != g.cin) {
    throw DimensionError("conv2d: input channels disagree, input " + shape_str(input.shape()) +
                         " kernels " + shape_str(kernels.shape()));
  }
  if (g.kh > g.h + 2 * padding || g.kw > g.w + 2 * padding) {
    throw DimensionError("conv2d: kernel " + shape_str(kernels.shape()) +
                         " larger than padded input " + shape_str(input.shape()) +
                         " (padding " + std::to_string(padding) + ")");
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw DimensionError("conv2d: bias " + shape_str(bias.shape()) + " does not match kernels " +
                         shape_str(kernels.shape()));
  }
  g.oh = (g.h + 2 * padding - g.kh) / stride + 1;
  g.ow = (g.w + 2 * padding - g.kw) / stride + 1;

  std::vector<double> out(g.cout * g.oh * g.ow, 0.0);
  const double* in = input.data().data();
  const double* ker = kernels.data().data();
  for (std::size_t co = 0; co < g.cout; ++co) {
    double* plane = out.data() + co * g.oh * g.ow;
    if (bias.defined()) std::fill(plane, plane + g.oh * g.ow, bias[co]);
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      const double* iplane = in + ci * g.h * g.w;
      for (std::size_t ky = 0; ky < g.kh; ++ky) {
        for (std::size_t kx = 0; kx < g.kw; ++kx) {
          const double wv = ker[((co * g.cin + ci) * g.kh + ky) * g.kw + kx];
          std::size_t lo, hi;
          g.column_range(kx, lo, hi);
          for (std::size_t oy = 0; oy < g.oh; ++oy) {
            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            const double* irow = iplane + static_cast<std::size_t>(iy) * g.w;
            const long off = static_cast<long>(kx) - static_cast<long>(padding);
            double* orow = plane + oy * g.ow;
            for (std::size_t ox = lo; ox < hi; ++ox) {
              orow[ox] += wv * irow[static_cast<long>(ox * stride) + off];
            }
          }
        }
      }
    }
  }
  Tensor result = make_result({g.cout, g.oh, g.ow}, std::move(out));
  if (tracking({&input, &kernels, &bias})) {
    record("conv2d", {&input, &kernels, &bias}, result,
           [in_n = input.node().get(), k_n = kernels.node().get(),
            b_n = bias.defined() ? bias.node().get() : nullptr, on = result.node().get(), g] {
             const double* gout = on->grad.data();
             double* gin = grad_of(in_n);
             double* gk = grad_of(k_n);
             double* gb = grad_of(b_n);
             const double* in = in_n->value.data();
             const double* ker = k_n->value.data();
             for (std::size_t co = 0; co < g.cout; ++co) {
               const double* gplane = gout + co * g.oh * g.ow;
               if (gb) {
                 double acc = 0.0;
                 for (std::size_t i = 0; i < g.oh * g.ow; ++i) acc += gplane[i];
                 gb[co] += acc;
               }
               for (std::size_t ci = 0; ci < g.cin; ++ci) {
                 const double* iplane = in + ci * g.h * g.w;
                 double* giplane = gin ? gin + ci * g.h * g.w : nullptr;
                 for (std::size_t ky = 0; ky < g.kh; ++ky) {
                   for (std::size_t kx = 0; kx < g.kw; ++kx) {
                     const std::size_t kidx = ((co * g.cin + ci) * g.kh + ky) * g.kw + kx;
                     const double wv = ker[kidx];
                     std::size_t lo, hi;
                     g.column_range(kx, lo, hi);
                     double wacc = 0.0;
                     for (std::size_t oy = 0; oy < g.oh; ++oy) {
                       const long iy =
                           static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
                       if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                       const std::size_t base = static_cast<std::size_t>(iy) * g.w;
                       const long off = static_cast<long>(kx) - static_cast<long>(g.pad);
                       const double* grow = gplane + oy * g.ow;
                       const double* irow = iplane + base;
                       for (std::size_t ox = lo; ox < hi; ++ox) {
                         wacc += irow[static_cast<long>(ox * g.stride) + off] * grow[ox];
                       }
                       if (giplane) {
                         double* girow = giplane + base;
                         for (std::size_t ox = lo; ox < hi; ++ox) {
                           girow[static_cast<long>(ox * g.stride) + off] += wv * grow[ox];
                         }
                       }
                     }
                     if (gk) gk[kidx] += wacc;
                   }
                 }
               }
             }
           });
  }
  return result;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
              std::size_t padding) {
  return conv2d(input, kernels, Tensor(), stride, padding);
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (tracking({&a, &b})) {
    record("add", {&a, &b}, result,
           [an = a.node().get(), bn = b.node().get(), on = result.node().get()] {
             const std::size_t n = on->grad.size();
             if (double* ga = grad_of(an))
               for (std::size_t i = 0; i < n; ++i) ga[i] += on->grad[i];
             if (double* gb = grad_of(bn))
               for (std::size_t i = 0; i < n; ++i) gb[i] += on->grad[i];
           });
  }
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (tracking({&a, &b})) {
    record("sub", {&a, &b}, result,
           [an = a.node().get(), bn = b.node().get(), on = result.node().get()] {
             const std::size_t n = on->grad.size();
             if (double* ga = grad_of(an))
               for (std::size_t i = 0; i < n; ++i) ga[i] += on->grad[i];
             if (double* gb = grad_of(bn))
               for (std::size_t i = 0; i < n; ++i) gb[i] -= on->grad[i];
           });
  }
  return result;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  Tensor result = make_result(a.shape(), std::move(out));
  if (tracking({&a, &b})) {
    record("mul", {&a, &b}, result,
           [an = a.node().get(), bn = b.node().get(), on = result.node().get()] {
             const std::size_t n = on->grad.size();
             if (double* ga = grad_of(an))
               for (std::size_t i = 0; i < n; ++i) ga[i] += on->grad[i] * bn->value[i];
             if (double* gb = grad_of(bn))
               for (std::size_t i = 0; i < n; ++i) gb[i] += on->grad[i] * an->value[i];
           });
  }
  return result;
}

Tensor scale(const Tensor& x, const Tensor& s) {
  require_single(s, "scale");
  const double sv = s[0];
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * sv;
  Tensor result = make_result(x.shape(), std::move(out));
  if (tracking({&x, &s})) {
    record("scale", {&x, &s}, result,
           [xn = x.node().get(), sn = s.node().get(), on = result.node().get()] {
             const std::size_t n = on->grad.size();
             if (double* gx = grad_of(xn))
               for (std::size_t i = 0; i < n; ++i) gx[i] += on->grad[i] * sn->value[0];
             if (double* gs = grad_of(sn)) {
               double acc = 0.0;
               for (std::size_t i = 0; i < n; ++i) acc += on->grad[i] * xn->value[i];
               gs[0] += acc;
             }
           });
  }
  return result;
}

Tensor scale(const Tensor& x, double s) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  Tensor result = make_result(x.shape(), std::move(out));
  if (tracking({&x})) {
    record("scale", {&x}, result, [xn = x.node().get(), on = result.node().get(), s] {
      if (double* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) gx[i] += on->grad[i] * s;
    });
  }
  return result;
}

Tensor add_row(const Tensor& x, const Tensor& r) {
  require_rank(x, 2, "add_row");
  require_rank(r, 1, "add_row");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (r.dim(0) != n) {
    throw DimensionError("add_row: row " + shape_str(r.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + r[j];
  Tensor result = make_result(x.shape(), std::move(out));
  if (tracking({&x, &r})) {
    record("add_row", {&x, &r}, result,
           [xn = x.node().get(), rn = r.node().get(), on = result.node().get(), m, n] {
             if (double* gx = grad_of(xn))
               for (std::size_t i = 0; i < m * n; ++i) gx[i] += on->grad[i];
             if (double* gr = grad_of(rn))
               for (std::size_t i = 0; i < m; ++i)
                 for (std::size_t j = 0; j < n; ++j) gr[j] += on->grad[i * n + j];
           });
  }
  return result;
}

Tensor add_scalar(const Tensor& x, const Tensor& s) {
  require_single(s, "add_scalar");
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + s[0];
  Tensor result = make_result(x.shape(), std::move(out));
  if (tracking({&x, &s})) {
    record("add_scalar", {&x, &s}, result,
           [xn = x.node().get(), sn = s.node().get(), on = result.node().get()] {
             const std::size_t n = on->grad.size();
             if (double* gx = grad_of(xn))
               for (std::size_t i = 0; i < n; ++i) gx[i] += on->grad[i];
             if (double* gs = grad_of(sn)) {
               double acc = 0.0;
               for (std::size_t i = 0; i < n; ++i) acc += on->grad[i];
               gs[0] += acc;
             }
           });
  }
  return result;
}

namespace {

// Unary op whose derivative is expressed through the input and output values.
template <typename Forward, typename Derivative>
Tensor unary(const char* name, const Tensor& x, Forward f, Derivative df) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
  Tensor result = make_result(x.shape(), std::move(out));
  if (tracking({&x})) {
    record(name, {&x}, result, [xn = x.node().get(), on = result.node().get(), df] {
      if (double* gx = grad_of(xn)) {
        for (std::size_t i = 0; i < on->grad.size(); ++i)
          gx[i] += on->grad[i] * df(xn->value[i], on->value[i]);
      }
    });
  }
  return result;
}

}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor pointwise(std::string_view name, const Tensor& x) {
  if (name == "sigmoid") return sigmoid(x);
  if (name == "tanh") return tanh(x);
  if (name == "relu") return relu(x);
  throw ConfigError("unknown pointwise op '" + std::string(name) + "'");
}

// ---- reductions & normalisation -------------------------------------------

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t l = 0; l < s.length; ++l) mx = std::max(mx, x[base + l * s.inner]);
      double z = 0.0;
      for (std::size_t l = 0; l < s.length; ++l) {
        const double e = std::exp(x[base + l * s.inner] - mx);
        out[base + l * s.inner] = e;
        z += e;
      }
      for (std::size_t l = 0; l < s.length; ++l) out[base + l * s.inner] /= z;
    }
  }
  Tensor result = make_result(x.shape(), std::move(out));
  if (tracking({&x})) {
    record("softmax", {&x}, result, [xn = x.node().get(), on = result.node().get(), s] {
      double* gx = grad_of(xn);
      if (!gx) return;
      const double* y = on->value.data();
      const double* g = on->grad.data();
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
          const std::size_t base = o * s.length * s.inner + in;
          double dot = 0.0;
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t i = base + l * s.inner;
            dot += g[i] * y[i];
          }
          for (std::size_t l = 0; l < s.length; ++l) {
            const std::size_t i = base + l * s.inner;
            gx[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return result;
}

namespace {

Tensor axis_sum(const char* name, const Tensor& x, std::size_t axis, double factor) {
  const AxisSplit s = split_axis(x.shape(), axis, name);
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t l = 0; l < s.length; ++l)
      for (std::size_t in = 0; in < s.inner; ++in)
        out[o * s.inner + in] += x[(o * s.length + l) * s.inner + in];
  for (double& v : out) v *= factor;
  Tensor result = make_result(drop_axis(x.shape(), axis), std::move(out));
  if (tracking({&x})) {
    record(name, {&x}, result, [xn = x.node().get(), on = result.node().get(), s, factor] {
      if (double* gx = grad_of(xn)) {
        for (std::size_t o = 0; o < s.outer; ++o)
          for (std::size_t l = 0; l < s.length; ++l)
            for (std::size_t in = 0; in < s.inner; ++in)
              gx[(o * s.length + l) * s.inner + in] += factor * on->grad[o * s.inner + in];
      }
    });
  }
  return result;
}

}  // namespace

Tensor sum(const Tensor& x, std::size_t axis) { return axis_sum("sum", x, axis, 1.0); }

Tensor mean(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "mean");
  return axis_sum("mean", x, axis, 1.0 / static_cast<double>(s.length));
}

Tensor sum_all(const Tensor& x) { return sum(reshape(x, {x.numel()}), 0); }

Tensor global_avg_pool_2d(const Tensor& x) {
  require_rank(x, 3, "global_avg_pool_2d");
  const std::size_t c = x.dim(0);
  return mean(reshape(x, {c, x.dim(1) * x.dim(2)}), 1);
}

Tensor reduce(std::string_view name, const Tensor& x, std::size_t axis) {
  if (name == "sum") return sum(x, axis);
  if (name == "mean") return mean(x, axis);
  if (name == "global_avg_pool_2d") return global_avg_pool_2d(x);
  throw ConfigError("unknown reduction '" + std::string(name) + "'");
}

Tensor neg_log_pick(const Tensor& probs, std::size_t label, double floor) {
  require_rank(probs, 1, "neg_log_pick");
  if (label >= probs.numel()) {
    throw ContractError("label " + std::to_string(label) + " out of range for " +
                        std::to_string(probs.numel()) + " classes");
  }
  const double p = probs[label];
  const bool clamped = p < floor;
  Tensor result = make_result({1}, {-std::log(clamped ? floor : p)});
  if (tracking({&probs})) {
    record("neg_log_pick", {&probs}, result,
           [pn = probs.node().get(), on = result.node().get(), label, clamped] {
             if (clamped) return;
             if (double* gp = grad_of(pn)) gp[label] -= on->grad[0] / pn->value[label];
           });
  }
  return result;
}

// ---- structural -----------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  Tensor result = make_result(std::move(shape), x.values());
  if (tracking({&x})) {
    record("reshape", {&x}, result, [xn = x.node().get(), on = result.node().get()] {
      if (double* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) gx[i] += on->grad[i];
    });
  }
  return result;
}

Tensor slice(const Tensor& x, std::size_t offset, std::size_t length) {
  require_rank(x, 1, "slice");
  if (offset + length > x.numel()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") out of range for " +
                         shape_str(x.shape()));
  }
  std::vector<double> out(x.values().begin() + static_cast<long>(offset),
                          x.values().begin() + static_cast<long>(offset + length));
  Tensor result = make_result({length}, std::move(out));
  if (tracking({&x})) {
    record("slice", {&x}, result, [xn = x.node().get(), on = result.node().get(), offset] {
      if (double* gx = grad_of(xn))
        for (std::size_t i = 0; i < on->grad.size(); ++i) gx[offset + i] += on->grad[i];
    });
  }
  return result;
}

Tensor row(const Tensor& x, std::size_t t) {
  require_rank(x, 2, "row");
  if (t >= x.dim(0)) {
    throw DimensionError("row " + std::to_string(t) + " out of range for " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(1);
  std::vector<double> out(x.values().begin() + static_cast<long>(t * n),
                          x.values().begin() + static_cast<long>((t + 1) * n));
  Tensor result = make_result({n}, std::move(out));
  if (tracking({&x})) {
    record("row", {&x}, result, [xn = x.node().get(), on = result.node().get(), t, n] {
      if (double* gx = grad_of(xn))
        for (std::size_t i = 0; i < n; ++i) gx[t * n + i] += on->grad[i];
    });
  }
  return result;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw DimensionError("stack_rows: no rows");
  const std::size_t n = rows.front().numel();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  bool track = false;
  for (const Tensor& r : rows) {
    require_rank(r, 1, "stack_rows");
    if (r.numel() != n) {
      throw DimensionError("stack_rows: row " + shape_str(r.shape()) + " vs " +
                           shape_str(rows.front().shape()));
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
    track = track || tracking({&r});
  }
  Tensor result = make_result({rows.size(), n}, std::move(out));
  if (track) {
    std::vector<TensorNode*> nodes;
    for (const Tensor& r : rows) nodes.push_back(r.node().get());
    TensorNode* out_node = result.node().get();
    out_node->requires_grad = true;
    out_node->is_leaf = false;
    out_node->grad.assign(out_node->value.size(), 0.0);
    Tape::Entry entry;
    entry.op = "stack_rows";
    for (const Tensor& r : rows) entry.inputs.push_back(r.node());
    entry.output = result.node();
    entry.backward = [nodes, out_node, n] {
      for (std::size_t t = 0; t < nodes.size(); ++t) {
        if (double* gr = grad_of(nodes[t]))
          for (std::size_t i = 0; i < n; ++i) gr[i] += out_node->grad[t * n + i];
      }
    };
    active_tape()->record(std::move(entry));
  }
  return result;
}

Tensor outer_add(const Tensor& p, const Tensor& q) {
  require_rank(p, 2, "outer_add");
  require_rank(q, 2, "outer_add");
  if (p.dim(1) != q.dim(1)) {
    throw DimensionError("outer_add: width mismatch " + shape_str(p.shape()) + " vs " +
                         shape_str(q.shape()));
  }
  const std::size_t tn = p.dim(0), un = q.dim(0), n = p.dim(1);
  std::vector<double> out(tn * un * n);
  for (std::size_t t = 0; t < tn; ++t)
    for (std::size_t u = 0; u < un; ++u)
      for (std::size_t i = 0; i < n; ++i) out[(t * un + u) * n + i] = p[t * n + i] + q[u * n + i];
  Tensor result = make_result({tn, un, n}, std::move(out));
  if (tracking({&p, &q})) {
    record("outer_add", {&p, &q}, result,
           [pn = p.node().get(), qn = q.node().get(), on = result.node().get(), tn, un, n] {
             double* gp = grad_of(pn);
             double* gq = grad_of(qn);
             for (std::size_t t = 0; t < tn; ++t)
               for (std::size_t u = 0; u < un; ++u)
                 for (std::size_t i = 0; i < n; ++i) {
                   const double g = on->grad[(t * un + u) * n + i];
                   if (gp) gp[t * n + i] += g;
                   if (gq) gq[u * n + i] += g;
                 }
           });
  }
  return result;
}

Tensor pairwise_gate_sum(const Tensor& beta, const Tensor& h) {
  require_rank(beta, 3, "pairwise_gate_sum");
  require_rank(h, 2, "pairwise_gate_sum");
  const std::size_t tn = beta.dim(0), un = beta.dim(1), n = beta.dim(2);
  if (h.dim(0) != un || h.dim(1) != n) {
    throw DimensionError("pairwise_gate_sum: gates " + shape_str(beta.shape()) +
                         " do not match states " + shape_str(h.shape()));
  }
  std::vector<double> out(tn * n, 0.0);
  for (std::size_t t = 0; t < tn; ++t)
    for (std::size_t u = 0; u < un; ++u)
      for (std::size_t i = 0; i < n; ++i) out[t * n + i] += beta[(t * un + u) * n + i] * h[u * n + i];
  Tensor result = make_result({tn, n}, std::move(out));
  if (tracking({&beta, &h})) {
    record("pairwise_gate_sum", {&beta, &h}, result,
           [bn = beta.node().get(), hn = h.node().get(), on = result.node().get(), tn, un, n] {
             double* gb = grad_of(bn);
             double* gh = grad_of(hn);
             for (std::size_t t = 0; t < tn; ++t)
               for (std::size_t u = 0; u < un; ++u)
                 for (std::size_t i = 0; i < n; ++i) {
                   const double g = on->grad[t * n + i];
                   if (gb) gb[(t * un + u) * n + i] += g * hn->value[u * n + i];
                   if (gh) gh[u * n + i] += g * bn->value[(t * un + u) * n + i];
                 }
           });
  }
  return result;
}

}  // namespace cta
