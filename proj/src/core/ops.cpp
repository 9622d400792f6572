#include "shotfuse/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "op_support.hpp"
#include "shotfuse/kernels/kernels.hpp"

namespace shotfuse {

using detail::AxisView;
using detail::axis_view;
using detail::make_result;
using detail::NodePtr;
using detail::normalize_axis;

namespace {

struct Broadcast {
  Shape out;
  std::size_t a_period;
  std::size_t b_period;
};

Shape strip_leading_ones(const Shape& s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] == 1) ++i;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(i), s.end());
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

Broadcast broadcast_shapes(const char* op, const Shape& a, const Shape& b) {
  const std::size_t na = shape_numel(a);
  const std::size_t nb = shape_numel(b);
  if (a == b) return {a, na, nb};
  const Shape sb = strip_leading_ones(b);
  if (is_suffix(sb, a) && b.size() <= a.size()) return {a, na, shape_numel(sb)};
  const Shape sa = strip_leading_ones(a);
  if (is_suffix(sa, b) && a.size() <= b.size()) return {b, shape_numel(sa), nb};
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " +
                       shape_str(b));
}

template <class T, class F, class GA, class GB>
Tensor<T> binary(const char* op, const Tensor<T>& a, const Tensor<T>& b, F f, GA grad_a, GB grad_b) {
  const Broadcast bc = broadcast_shapes(op, a.shape(), b.shape());
  const std::size_t n = shape_numel(bc.out);
  const auto& av = a.node()->data;
  const auto& bv = b.node()->data;
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % bc.a_period], bv[i % bc.b_period]);
  NodePtr<T> an = a.node();
  NodePtr<T> bn = b.node();
  return make_result<T>(op, bc.out, std::move(out), {an, bn},
                        [an, bn, bc, n, grad_a, grad_b](const TensorNode<T>& o) {
                          for (std::size_t i = 0; i < n; ++i) {
                            const std::size_t ia = i % bc.a_period;
                            const std::size_t ib = i % bc.b_period;
                            const T x = an->data[ia];
                            const T y = bn->data[ib];
                            if (an->requires_grad) an->grad[ia] += grad_a(o.grad[i], x, y);
                            if (bn->requires_grad) bn->grad[ib] += grad_b(o.grad[i], x, y);
                          }
                        });
}

/// `d(x, y)` is dy/dx evaluated at input x with output y.
template <class T, class F, class D>
Tensor<T> unary(const char* op, const Tensor<T>& x, F f, D d) {
  const auto& xv = x.node()->data;
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  NodePtr<T> xn = x.node();
  return make_result<T>(op, x.shape(), std::move(out), {xn}, [xn, d](const TensorNode<T>& o) {
    for (std::size_t i = 0; i < o.data.size(); ++i)
      xn->grad[i] += o.grad[i] * d(xn->data[i], o.data[i]);
  });
}

template <class T>
T stable_sigmoid(T v) {
  if (v >= 0) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return g; });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T g, T, T) { return g; },
      [](T g, T, T) { return -g; });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T g, T, T y) { return g * y; },
      [](T g, T x, T) { return g * x; });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  for (T v : b.data())
    if (v == T(0)) throw DomainError("div: division by zero");
  return binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T g, T, T y) { return g / y; },
      [](T g, T x, T y) { return -g * x / (y * y); });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return unary<T>("add_scalar", x, [c](T v) { return v + c; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> mul_scalar(const Tensor<T>& x, T c) {
  return unary<T>("mul_scalar", x, [c](T v) { return v * c; }, [c](T, T) { return c; });
}

template <class T>
Tensor<T> neg(const Tensor<T>& x) {
  return mul_scalar(x, T(-1));
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  for (std::size_t i = 0; i < x.numel(); ++i)
    if (!(x.data()[i] > T(0)))
      throw DomainError("log: non-positive argument " + std::to_string(x.data()[i]) +
                        " at flat index " + std::to_string(i));
  return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Tensor<T> pow(const Tensor<T>& x, T p) {
  const bool integral = std::floor(p) == p;
  for (T v : x.data()) {
    if (!integral && !(v > T(0))) throw DomainError("pow: non-integer exponent of non-positive value");
    if (integral && p < 0 && v == T(0)) throw DomainError("pow: negative exponent of zero");
  }
  return unary<T>(
      "pow", x, [p](T v) { return std::pow(v, p); },
      [p](T v, T) { return p == T(0) ? T(0) : p * std::pow(v, p - T(1)); });
}

template <class T>
Tensor<T> sqrt(const Tensor<T>& x) {
  for (T v : x.data())
    if (!(v > T(0))) throw DomainError("sqrt: non-positive argument");
  return unary<T>("sqrt", x, [](T v) { return std::sqrt(v); }, [](T, T y) { return T(0.5) / y; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>("sigmoid", x, [](T v) { return stable_sigmoid(v); },
                  [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>("relu", x, [](T v) { return v > T(0) ? v : T(0); },
                  [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& x, T negative_slope) {
  return unary<T>(
      "leaky_relu", x, [negative_slope](T v) { return v > T(0) ? v : negative_slope * v; },
      [negative_slope](T v, T) { return v > T(0) ? T(1) : negative_slope; });
}

template <class T>
Tensor<T> swish(const Tensor<T>& x) {
  return unary<T>(
      "swish", x, [](T v) { return v * stable_sigmoid(v); },
      [](T v, T) {
        const T s = stable_sigmoid(v);
        return s + v * s * (T(1) - s);
      });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() < 1 || a.ndim() > 2 || b.ndim() < 1 || b.ndim() > 2 || (a.ndim() == 1 && b.ndim() == 1))
    throw DimensionError("matmul: unsupported ranks " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  const std::size_t m = a.ndim() == 2 ? a.shape()[0] : 1;
  const std::size_t k = a.shape().back();
  const std::size_t kb = b.shape()[0];
  const std::size_t n = b.ndim() == 2 ? b.shape()[1] : 1;
  if (k != kb)
    throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
  Shape out_shape;
  if (a.ndim() == 2) out_shape.push_back(m);
  if (b.ndim() == 2) out_shape.push_back(n);
  std::vector<T> out(m * n);
  kernels::gemm<T>(false, false, m, n, k, a.data().data(), k, b.data().data(), n, out.data(), n, false);
  NodePtr<T> an = a.node();
  NodePtr<T> bn = b.node();
  return make_result<T>("matmul", out_shape, std::move(out), {an, bn},
                        [an, bn, m, n, k](const TensorNode<T>& o) {
                          if (an->requires_grad)
                            kernels::gemm<T>(false, true, m, k, n, o.grad.data(), n, bn->data.data(),
                                             n, an->grad.data(), k, true);
                          if (bn->requires_grad)
                            kernels::gemm<T>(true, false, k, n, m, an->data.data(), k, o.grad.data(),
                                             n, bn->grad.data(), n, true);
                        });
}

template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[1])
    throw DimensionError("matmul_nt: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  const std::size_t m = a.shape()[0];
  const std::size_t k = a.shape()[1];
  const std::size_t n = b.shape()[0];
  std::vector<T> out(m * n);
  kernels::gemm<T>(false, true, m, n, k, a.data().data(), k, b.data().data(), k, out.data(), n, false);
  NodePtr<T> an = a.node();
  NodePtr<T> bn = b.node();
  return make_result<T>("matmul_nt", {m, n}, std::move(out), {an, bn},
                        [an, bn, m, n, k](const TensorNode<T>& o) {
                          if (an->requires_grad)
                            kernels::gemm<T>(false, false, m, k, n, o.grad.data(), n,
                                             bn->data.data(), k, an->grad.data(), k, true);
                          if (bn->requires_grad)
                            kernels::gemm<T>(true, false, n, k, m, o.grad.data(), n,
                                             an->data.data(), k, bn->grad.data(), k, true);
                        });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ContractError("concat: empty input list");
  const Shape& first = parts[0].shape();
  const std::size_t ax = normalize_axis(axis, first.size(), first);
  Shape out_shape = first;
  out_shape[ax] = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = (i == ax) || s[i] == first[i];
    if (!ok)
      throw DimensionError("concat: shape " + shape_str(s) + " incompatible with " +
                           shape_str(first) + " along axis " + std::to_string(axis));
    extents.push_back(s[ax]);
    out_shape[ax] += s[ax];
  }
  const AxisView ov = axis_view(out_shape, ax);
  std::vector<T> out(shape_numel(out_shape));
  std::vector<NodePtr<T>> nodes;
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& src = parts[pi].node()->data;
    const std::size_t run = extents[pi] * ov.inner;
    for (std::size_t o = 0; o < ov.outer; ++o)
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * run), run,
                  out.begin() + static_cast<std::ptrdiff_t>(o * ov.extent * ov.inner + offset * ov.inner));
    offset += extents[pi];
    nodes.push_back(parts[pi].node());
  }
  auto inputs = nodes;
  return make_result<T>("concat", out_shape, std::move(out), std::move(inputs),
                        [nodes, extents, ov](const TensorNode<T>& o) {
                          std::size_t off = 0;
                          for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                            const std::size_t run = extents[pi] * ov.inner;
                            if (nodes[pi]->requires_grad) {
                              for (std::size_t r = 0; r < ov.outer; ++r) {
                                const T* g = o.grad.data() + r * ov.extent * ov.inner + off * ov.inner;
                                T* dst = nodes[pi]->grad.data() + r * run;
                                for (std::size_t i = 0; i < run; ++i) dst[i] += g[i];
                              }
                            }
                            off += extents[pi];
                          }
                        });
}

template <class T>
Tensor<T> stack(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ContractError("stack: empty input list");
  std::vector<Tensor<T>> expanded;
  expanded.reserve(parts.size());
  for (const auto& p : parts) {
    detail::require_same_shape("stack", parts[0].shape(), p.shape());
    Shape s = p.shape();
    s.insert(s.begin(), 1);
    expanded.push_back(reshape(p, s));
  }
  return concat(expanded, 0);
}

template <class T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t ax = normalize_axis(axis, x.ndim(), x.shape());
  if (begin >= end || end > x.shape()[ax])
    throw DimensionError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + shape_str(x.shape()) + " axis " +
                         std::to_string(axis));
  const AxisView v = axis_view(x.shape(), ax);
  Shape out_shape = x.shape();
  out_shape[ax] = end - begin;
  const std::size_t run = (end - begin) * v.inner;
  std::vector<T> out(v.outer * run);
  const auto& src = x.node()->data;
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(o * v.extent * v.inner + begin * v.inner), run,
                out.begin() + static_cast<std::ptrdiff_t>(o * run));
  NodePtr<T> xn = x.node();
  return make_result<T>("slice", out_shape, std::move(out), {xn},
                        [xn, v, begin, run](const TensorNode<T>& o) {
                          for (std::size_t r = 0; r < v.outer; ++r) {
                            T* dst = xn->grad.data() + r * v.extent * v.inner + begin * v.inner;
                            const T* g = o.grad.data() + r * run;
                            for (std::size_t i = 0; i < run; ++i) dst[i] += g[i];
                          }
                        });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  NodePtr<T> xn = x.node();
  return make_result<T>("reshape", std::move(shape), xn->data, {xn}, [xn](const TensorNode<T>& o) {
    for (std::size_t i = 0; i < o.grad.size(); ++i) xn->grad[i] += o.grad[i];
  });
}

template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& order) {
  const std::size_t nd = x.ndim();
  std::vector<std::size_t> check = order;
  std::sort(check.begin(), check.end());
  for (std::size_t i = 0; i < check.size(); ++i)
    if (check.size() != nd || check[i] != i)
      throw DimensionError("permute: invalid axis order for shape " + shape_str(x.shape()));
  const Shape& in_shape = x.shape();
  Shape out_shape(nd);
  for (std::size_t i = 0; i < nd; ++i) out_shape[i] = in_shape[order[i]];
  std::vector<std::size_t> in_strides(nd, 1);
  for (std::size_t i = nd; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];
  const std::size_t n = x.numel();
  // Flat source index for every output position.
  std::vector<std::size_t> src_index(n);
  std::vector<std::size_t> idx(nd, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t s = 0;
    for (std::size_t d = 0; d < nd; ++d) s += idx[d] * in_strides[order[d]];
    src_index[flat] = s;
    for (std::size_t d = nd; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  std::vector<T> out(n);
  const auto& src = x.node()->data;
  for (std::size_t i = 0; i < n; ++i) out[i] = src[src_index[i]];
  NodePtr<T> xn = x.node();
  return make_result<T>("permute", out_shape, std::move(out), {xn},
                        [xn, src_index = std::move(src_index)](const TensorNode<T>& o) {
                          for (std::size_t i = 0; i < src_index.size(); ++i)
                            xn->grad[src_index[i]] += o.grad[i];
                        });
}

template <class T>
Tensor<T> transpose(const Tensor<T>& x) {
  if (x.ndim() != 2) throw DimensionError("transpose: expected 2-D tensor, got " + shape_str(x.shape()));
  return permute(x, {1, 0});
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  const T total = kernels::sum<T>(x.data().data(), x.numel());
  NodePtr<T> xn = x.node();
  return make_result<T>("sum", {}, {total}, {xn}, [xn](const TensorNode<T>& o) {
    for (T& g : xn->grad) g += o.grad[0];
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x, int axis, bool keepdim) {
  const std::size_t ax = normalize_axis(axis, x.ndim(), x.shape());
  const AxisView v = axis_view(x.shape(), ax);
  Shape out_shape = x.shape();
  if (keepdim)
    out_shape[ax] = 1;
  else
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(ax));
  std::vector<T> out(v.outer * v.inner, T(0));
  const auto& src = x.node()->data;
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t e = 0; e < v.extent; ++e)
      for (std::size_t i = 0; i < v.inner; ++i)
        out[o * v.inner + i] += src[(o * v.extent + e) * v.inner + i];
  NodePtr<T> xn = x.node();
  return make_result<T>("sum_axis", out_shape, std::move(out), {xn}, [xn, v](const TensorNode<T>& o) {
    for (std::size_t r = 0; r < v.outer; ++r)
      for (std::size_t e = 0; e < v.extent; ++e)
        for (std::size_t i = 0; i < v.inner; ++i)
          xn->grad[(r * v.extent + e) * v.inner + i] += o.grad[r * v.inner + i];
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.numel() == 0) throw ContractError("mean of empty tensor");
  return mul_scalar(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <class T>
Tensor<T> mean(const Tensor<T>& x, int axis, bool keepdim) {
  const std::size_t ax = normalize_axis(axis, x.ndim(), x.shape());
  if (x.shape()[ax] == 0) throw ContractError("mean over empty axis");
  return mul_scalar(sum(x, axis, keepdim), T(1) / static_cast<T>(x.shape()[ax]));
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.ndim(), x.shape());
  const AxisView v = axis_view(x.shape(), ax);
  const auto& src = x.node()->data;
  std::vector<T> out(src.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      T mx = src[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, src[base + e * v.inner]);
      T total = 0;
      for (std::size_t e = 0; e < v.extent; ++e) {
        const T ev = std::exp(src[base + e * v.inner] - mx);
        out[base + e * v.inner] = ev;
        total += ev;
      }
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] /= total;
    }
  }
  NodePtr<T> xn = x.node();
  return make_result<T>("softmax", x.shape(), std::move(out), {xn}, [xn, v](const TensorNode<T>& o) {
    for (std::size_t r = 0; r < v.outer; ++r) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = r * v.extent * v.inner + i;
        T dotp = 0;
        for (std::size_t e = 0; e < v.extent; ++e)
          dotp += o.grad[base + e * v.inner] * o.data[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const std::size_t k = base + e * v.inner;
          xn->grad[k] += o.data[k] * (o.grad[k] - dotp);
        }
      }
    }
  });
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& x, int axis) {
  const std::size_t ax = normalize_axis(axis, x.ndim(), x.shape());
  const AxisView v = axis_view(x.shape(), ax);
  const auto& src = x.node()->data;
  std::vector<T> out(src.size());
  for (std::size_t o = 0; o < v.outer; ++o) {
    for (std::size_t i = 0; i < v.inner; ++i) {
      const std::size_t base = o * v.extent * v.inner + i;
      T mx = src[base];
      for (std::size_t e = 1; e < v.extent; ++e) mx = std::max(mx, src[base + e * v.inner]);
      T total = 0;
      for (std::size_t e = 0; e < v.extent; ++e) total += std::exp(src[base + e * v.inner] - mx);
      const T lse = mx + std::log(total);
      for (std::size_t e = 0; e < v.extent; ++e) out[base + e * v.inner] = src[base + e * v.inner] - lse;
    }
  }
  NodePtr<T> xn = x.node();
  return make_result<T>("log_softmax", x.shape(), std::move(out), {xn}, [xn, v](const TensorNode<T>& o) {
    for (std::size_t r = 0; r < v.outer; ++r) {
      for (std::size_t i = 0; i < v.inner; ++i) {
        const std::size_t base = r * v.extent * v.inner + i;
        T gsum = 0;
        for (std::size_t e = 0; e < v.extent; ++e) gsum += o.grad[base + e * v.inner];
        for (std::size_t e = 0; e < v.extent; ++e) {
          const std::size_t k = base + e * v.inner;
          xn->grad[k] += o.grad[k] - std::exp(o.data[k]) * gsum;
        }
      }
    }
  });
}

template <class T>
Tensor<T> mean_pool(const std::vector<Tensor<T>>& items) {
  if (items.empty()) throw ContractError("mean_pool: empty sequence");
  const Shape& shape = items[0].shape();
  std::vector<T> out(items[0].numel(), T(0));
  std::vector<NodePtr<T>> nodes;
  for (const auto& it : items) {
    detail::require_same_shape("mean_pool", shape, it.shape());
    kernels::axpy<T>(T(1), it.data().data(), out.data(), out.size());
    nodes.push_back(it.node());
  }
  const T inv = T(1) / static_cast<T>(items.size());
  for (T& v : out) v *= inv;
  auto inputs = nodes;
  return make_result<T>("mean_pool", shape, std::move(out), std::move(inputs),
                        [nodes, inv](const TensorNode<T>& o) {
                          for (const auto& n : nodes)
                            if (n->requires_grad)
                              kernels::axpy<T>(inv, o.grad.data(), n->grad.data(), o.grad.size());
                        });
}

#define SHOTFUSE_INSTANTIATE(T)                                                      \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                        \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                                \
  template Tensor<T> neg(const Tensor<T>&);                                          \
  template Tensor<T> exp(const Tensor<T>&);                                          \
  template Tensor<T> log(const Tensor<T>&);                                          \
  template Tensor<T> tanh(const Tensor<T>&);                                         \
  template Tensor<T> pow(const Tensor<T>&, T);                                       \
  template Tensor<T> sqrt(const Tensor<T>&);                                         \
  template Tensor<T> sigmoid(const Tensor<T>&);                                      \
  template Tensor<T> relu(const Tensor<T>&);                                         \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                \
  template Tensor<T> swish(const Tensor<T>&);                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                     \
  template Tensor<T> stack(const std::vector<Tensor<T>>&);                           \
  template Tensor<T> slice(const Tensor<T>&, int, std::size_t, std::size_t);         \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                               \
  template Tensor<T> transpose(const Tensor<T>&);                                    \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<std::size_t>&);     \
  template Tensor<T> sum(const Tensor<T>&);                                          \
  template Tensor<T> sum(const Tensor<T>&, int, bool);                               \
  template Tensor<T> mean(const Tensor<T>&);                                         \
  template Tensor<T> mean(const Tensor<T>&, int, bool);                              \
  template Tensor<T> softmax(const Tensor<T>&, int);                                 \
  template Tensor<T> log_softmax(const Tensor<T>&, int);                             \
  template Tensor<T> mean_pool(const std::vector<Tensor<T>>&);
SHOTFUSE_INSTANTIATE(float)
SHOTFUSE_INSTANTIATE(double)
#undef SHOTFUSE_INSTANTIATE

}  // namespace shotfuse
