#include <algorithm>
#include <cmath>

#include "../core/op_support.hpp"
#include "shotfuse/kernels/kernels.hpp"
#include "shotfuse/nn.hpp"

namespace shotfuse {

using detail::make_result;
using detail::NodePtr;

std::string_view activation_name(Activation kind) {
  switch (kind) {
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Swish: return "swish";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "swish") return Activation::Swish;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + std::string(name) +
                    "' (expected relu, leaky_relu, swish, sigmoid)");
}

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation kind, T leaky_slope) {
  switch (kind) {
    case Activation::Relu: return relu(x);
    case Activation::LeakyRelu: return leaky_relu(x, leaky_slope);
    case Activation::Swish: return swish(x);
    case Activation::Sigmoid: return sigmoid(x);
  }
  throw ConfigError("unknown activation kind");
}

template <class T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<T> values(shape_numel(shape));
  for (T& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>::from(std::move(shape), std::move(values), true);
}

template <class T>
LinearParams<T> LinearParams<T>::init(std::size_t in, std::size_t out, Rng& rng) {
  return {glorot_uniform<T>({out, in}, in, out, rng), Tensor<T>::zeros({out}, true)};
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p) {
  const std::size_t in = p.in_features();
  if (x.ndim() == 0 || x.shape().back() != in)
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(p.weight.shape()));
  if (x.ndim() == 1) {
    Tensor<T> y = matmul_nt(reshape(x, {1, in}), p.weight);
    return reshape(add(y, p.bias), {p.out_features()});
  }
  if (x.ndim() != 2)
    throw DimensionError("linear: expected [in] or [N, in], got " + shape_str(x.shape()));
  return add(matmul_nt(x, p.weight), p.bias);
}

template <class T>
BatchNormState<T> BatchNormState<T>::init(std::size_t channels) {
  BatchNormState s;
  s.gamma = Tensor<T>::full({channels}, T(1), true);
  s.beta = Tensor<T>::zeros({channels}, true);
  s.running_mean.assign(channels, T(0));
  s.running_var.assign(channels, T(1));
  return s;
}

template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, BatchNormState<T>& state, Mode mode) {
  if (x.ndim() < 2 || x.shape()[1] != state.channels())
    throw DimensionError("batchnorm: input " + shape_str(x.shape()) + " does not match " +
                         std::to_string(state.channels()) + " channels");
  const std::size_t n = x.shape()[0];
  const std::size_t c = x.shape()[1];
  const std::size_t inner = x.numel() / (n * c);
  const std::size_t m = n * inner;
  const auto& xv = x.node()->data;
  const auto& gamma = state.gamma.node()->data;
  const auto& beta = state.beta.node()->data;
  auto at = [c, inner](std::size_t b, std::size_t ch, std::size_t i) { return (b * c + ch) * inner + i; };

  std::vector<T> mu(c), inv_std(c);
  if (mode == Mode::Train) {
    if (m < 2)
      throw ContractError("batchnorm: train mode needs at least 2 values per channel, got " +
                          std::to_string(m));
    for (std::size_t ch = 0; ch < c; ++ch) {
      T s = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < inner; ++i) s += xv[at(b, ch, i)];
      const T mean_v = s / static_cast<T>(m);
      T sq = 0;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < inner; ++i) {
          const T d = xv[at(b, ch, i)] - mean_v;
          sq += d * d;
        }
      const T var = sq / static_cast<T>(m);
      mu[ch] = mean_v;
      inv_std[ch] = T(1) / std::sqrt(var + state.eps);
      const T unbiased = sq / static_cast<T>(m - 1);
      state.running_mean[ch] = (T(1) - state.momentum) * state.running_mean[ch] + state.momentum * mean_v;
      state.running_var[ch] = (T(1) - state.momentum) * state.running_var[ch] + state.momentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mu[ch] = state.running_mean[ch];
      inv_std[ch] = T(1) / std::sqrt(state.running_var[ch] + state.eps);
    }
  }

  std::vector<T> xhat(xv.size()), out(xv.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t k = at(b, ch, i);
        xhat[k] = (xv[k] - mu[ch]) * inv_std[ch];
        out[k] = gamma[ch] * xhat[k] + beta[ch];
      }

  NodePtr<T> xn = x.node();
  NodePtr<T> gn = state.gamma.node();
  NodePtr<T> bn = state.beta.node();
  const bool train = mode == Mode::Train;
  return make_result<T>(
      "batchnorm", x.shape(), std::move(out), {xn, gn, bn},
      [xn, gn, bn, xhat = std::move(xhat), inv_std, n, c, inner, m, train, at](const TensorNode<T>& o) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          T gsum = 0, gxhat = 0;
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = at(b, ch, i);
              gsum += o.grad[k];
              gxhat += o.grad[k] * xhat[k];
            }
          if (gn->requires_grad) gn->grad[ch] += gxhat;
          if (bn->requires_grad) bn->grad[ch] += gsum;
          if (!xn->requires_grad) continue;
          const T scale = gn->data[ch] * inv_std[ch];
          const T gmean = gsum / static_cast<T>(m);
          const T gxmean = gxhat / static_cast<T>(m);
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t i = 0; i < inner; ++i) {
              const std::size_t k = at(b, ch, i);
              xn->grad[k] += train ? scale * (o.grad[k] - gmean - xhat[k] * gxmean) : scale * o.grad[k];
            }
        }
      });
}

template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ContractError("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  if (mode == Mode::Eval || rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(x.numel());
  for (T& v : mask) v = rng.uniform() < rate ? T(0) : keep_scale;
  std::vector<T> out(x.numel());
  kernels::mul<T>(x.data().data(), mask.data(), out.data(), out.size());
  NodePtr<T> xn = x.node();
  return make_result<T>("dropout", x.shape(), std::move(out), {xn},
                        [xn, mask = std::move(mask)](const TensorNode<T>& o) {
                          for (std::size_t i = 0; i < mask.size(); ++i) xn->grad[i] += o.grad[i] * mask[i];
                        });
}

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0) throw ContractError("conv3d: zero stride");
  if (kernel == 0 || kernel > in + 2 * pad)
    throw DimensionError("conv3d: kernel extent " + std::to_string(kernel) +
                         " larger than padded input " + std::to_string(in + 2 * pad));
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace {

struct ConvDims {
  std::size_t n, cin, t, h, w;
  std::size_t cout, kt, kh, kw;
  std::size_t ot, oh, ow;
  Triple s, p;

  std::size_t in_volume() const { return t * h * w; }
  std::size_t out_volume() const { return ot * oh * ow; }
  std::size_t patch() const { return cin * kt * kh * kw; }
};

template <class T>
void conv_direct_forward(const ConvDims& d, const T* x, const T* k, T* y) {
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t co = 0; co < d.cout; ++co)
      for (std::size_t ot = 0; ot < d.ot; ++ot)
        for (std::size_t oh = 0; oh < d.oh; ++oh)
          for (std::size_t ow = 0; ow < d.ow; ++ow) {
            T acc = 0;
            for (std::size_t ci = 0; ci < d.cin; ++ci)
              for (std::size_t a = 0; a < d.kt; ++a) {
                const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(ot * d.s[0] + a) - static_cast<std::ptrdiff_t>(d.p[0]);
                if (it < 0 || it >= static_cast<std::ptrdiff_t>(d.t)) continue;
                for (std::size_t bh = 0; bh < d.kh; ++bh) {
                  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.s[1] + bh) - static_cast<std::ptrdiff_t>(d.p[1]);
                  if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
                  for (std::size_t cw = 0; cw < d.kw; ++cw) {
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.s[2] + cw) - static_cast<std::ptrdiff_t>(d.p[2]);
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                    acc += x[(((b * d.cin + ci) * d.t + it) * d.h + ih) * d.w + iw] *
                           k[(((co * d.cin + ci) * d.kt + a) * d.kh + bh) * d.kw + cw];
                  }
                }
              }
            y[(((b * d.cout + co) * d.ot + ot) * d.oh + oh) * d.ow + ow] = acc;
          }
}

template <class T>
void conv_direct_backward(const ConvDims& d, const T* x, const T* k, const T* g, T* gx, T* gk) {
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t co = 0; co < d.cout; ++co)
      for (std::size_t ot = 0; ot < d.ot; ++ot)
        for (std::size_t oh = 0; oh < d.oh; ++oh)
          for (std::size_t ow = 0; ow < d.ow; ++ow) {
            const T go = g[(((b * d.cout + co) * d.ot + ot) * d.oh + oh) * d.ow + ow];
            if (go == T(0)) continue;
            for (std::size_t ci = 0; ci < d.cin; ++ci)
              for (std::size_t a = 0; a < d.kt; ++a) {
                const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(ot * d.s[0] + a) - static_cast<std::ptrdiff_t>(d.p[0]);
                if (it < 0 || it >= static_cast<std::ptrdiff_t>(d.t)) continue;
                for (std::size_t bh = 0; bh < d.kh; ++bh) {
                  const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.s[1] + bh) - static_cast<std::ptrdiff_t>(d.p[1]);
                  if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(d.h)) continue;
                  for (std::size_t cw = 0; cw < d.kw; ++cw) {
                    const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.s[2] + cw) - static_cast<std::ptrdiff_t>(d.p[2]);
                    if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(d.w)) continue;
                    const std::size_t xi = (((b * d.cin + ci) * d.t + it) * d.h + ih) * d.w + iw;
                    const std::size_t ki = (((co * d.cin + ci) * d.kt + a) * d.kh + bh) * d.kw + cw;
                    if (gx) gx[xi] += go * k[ki];
                    if (gk) gk[ki] += go * x[xi];
                  }
                }
              }
          }
}

/// Column matrix [patch, out_volume] for one sample.
template <class T>
void im2col(const ConvDims& d, const T* x, T* cols) {
  const std::size_t pv = d.out_volume();
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < d.cin; ++ci)
    for (std::size_t a = 0; a < d.kt; ++a)
      for (std::size_t bh = 0; bh < d.kh; ++bh)
        for (std::size_t cw = 0; cw < d.kw; ++cw, ++row) {
          T* dst = cols + row * pv;
          std::size_t col = 0;
          for (std::size_t ot = 0; ot < d.ot; ++ot) {
            const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(ot * d.s[0] + a) - static_cast<std::ptrdiff_t>(d.p[0]);
            const bool t_ok = it >= 0 && it < static_cast<std::ptrdiff_t>(d.t);
            for (std::size_t oh = 0; oh < d.oh; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.s[1] + bh) - static_cast<std::ptrdiff_t>(d.p[1]);
              const bool h_ok = t_ok && ih >= 0 && ih < static_cast<std::ptrdiff_t>(d.h);
              const T* src = h_ok ? x + ((ci * d.t + static_cast<std::size_t>(it)) * d.h + static_cast<std::size_t>(ih)) * d.w : nullptr;
              for (std::size_t ow = 0; ow < d.ow; ++ow, ++col) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.s[2] + cw) - static_cast<std::ptrdiff_t>(d.p[2]);
                dst[col] = (src && iw >= 0 && iw < static_cast<std::ptrdiff_t>(d.w)) ? src[iw] : T(0);
              }
            }
          }
        }
}

template <class T>
void col2im_add(const ConvDims& d, const T* cols, T* gx) {
  const std::size_t pv = d.out_volume();
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < d.cin; ++ci)
    for (std::size_t a = 0; a < d.kt; ++a)
      for (std::size_t bh = 0; bh < d.kh; ++bh)
        for (std::size_t cw = 0; cw < d.kw; ++cw, ++row) {
          const T* src = cols + row * pv;
          std::size_t col = 0;
          for (std::size_t ot = 0; ot < d.ot; ++ot) {
            const std::ptrdiff_t it = static_cast<std::ptrdiff_t>(ot * d.s[0] + a) - static_cast<std::ptrdiff_t>(d.p[0]);
            const bool t_ok = it >= 0 && it < static_cast<std::ptrdiff_t>(d.t);
            for (std::size_t oh = 0; oh < d.oh; ++oh) {
              const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * d.s[1] + bh) - static_cast<std::ptrdiff_t>(d.p[1]);
              const bool h_ok = t_ok && ih >= 0 && ih < static_cast<std::ptrdiff_t>(d.h);
              T* dst = h_ok ? gx + ((ci * d.t + static_cast<std::size_t>(it)) * d.h + static_cast<std::size_t>(ih)) * d.w : nullptr;
              for (std::size_t ow = 0; ow < d.ow; ++ow, ++col) {
                const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * d.s[2] + cw) - static_cast<std::ptrdiff_t>(d.p[2]);
                if (dst && iw >= 0 && iw < static_cast<std::ptrdiff_t>(d.w)) dst[iw] += src[col];
              }
            }
          }
        }
}

template <class T>
void conv_im2col_forward(const ConvDims& d, const T* x, const T* k, T* y) {
  const std::size_t pv = d.out_volume();
  const std::size_t kp = d.patch();
  std::vector<T> cols(kp * pv);
  for (std::size_t b = 0; b < d.n; ++b) {
    im2col(d, x + b * d.cin * d.in_volume(), cols.data());
    kernels::gemm<T>(false, false, d.cout, pv, kp, k, kp, cols.data(), pv, y + b * d.cout * pv, pv, false);
  }
}

template <class T>
void conv_im2col_backward(const ConvDims& d, const T* x, const T* k, const T* g, T* gx, T* gk) {
  const std::size_t pv = d.out_volume();
  const std::size_t kp = d.patch();
  std::vector<T> cols(kp * pv);
  for (std::size_t b = 0; b < d.n; ++b) {
    const T* gb = g + b * d.cout * pv;
    if (gk) {
      im2col(d, x + b * d.cin * d.in_volume(), cols.data());
      kernels::gemm<T>(false, true, d.cout, kp, pv, gb, pv, cols.data(), pv, gk, kp, true);
    }
    if (gx) {
      kernels::gemm<T>(true, false, kp, pv, d.cout, k, kp, gb, pv, cols.data(), pv, false);
      col2im_add(d, cols.data(), gx + b * d.cin * d.in_volume());
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias,
                 const Conv3dGeometry& geom, ConvAlgo algo) {
  const bool batched = x.ndim() == 5;
  if (!(batched || x.ndim() == 4) || kernels.ndim() != 5)
    throw DimensionError("conv3d: expected input [N,C,T,H,W] or [C,T,H,W] and kernels [Co,Ci,kt,kh,kw], got " +
                         shape_str(x.shape()) + " and " + shape_str(kernels.shape()));
  const Shape& xs = x.shape();
  const Shape& ks = kernels.shape();
  ConvDims d{};
  d.n = batched ? xs[0] : 1;
  const std::size_t off = batched ? 1 : 0;
  d.cin = xs[off];
  d.t = xs[off + 1];
  d.h = xs[off + 2];
  d.w = xs[off + 3];
  d.cout = ks[0];
  if (ks[1] != d.cin)
    throw DimensionError("conv3d: input channels of " + shape_str(xs) + " do not match kernels " +
                         shape_str(ks));
  d.kt = ks[2];
  d.kh = ks[3];
  d.kw = ks[4];
  d.s = geom.stride;
  d.p = geom.padding;
  d.ot = conv_out_extent(d.t, d.kt, d.s[0], d.p[0]);
  d.oh = conv_out_extent(d.h, d.kh, d.s[1], d.p[1]);
  d.ow = conv_out_extent(d.w, d.kw, d.s[2], d.p[2]);
  const bool has_bias = bias.defined();
  if (has_bias && (bias.ndim() != 1 || bias.shape()[0] != d.cout))
    throw DimensionError("conv3d: bias " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(d.cout) + " output channels");

  std::vector<T> out(d.n * d.cout * d.out_volume());
  if (algo == ConvAlgo::Direct)
    conv_direct_forward(d, x.data().data(), kernels.data().data(), out.data());
  else
    conv_im2col_forward(d, x.data().data(), kernels.data().data(), out.data());
  const std::size_t pv = d.out_volume();
  if (has_bias)
    for (std::size_t b = 0; b < d.n; ++b)
      for (std::size_t co = 0; co < d.cout; ++co) {
        T* row = out.data() + (b * d.cout + co) * pv;
        const T bv = bias.data()[co];
        for (std::size_t i = 0; i < pv; ++i) row[i] += bv;
      }

  Shape out_shape = batched ? Shape{d.n, d.cout, d.ot, d.oh, d.ow} : Shape{d.cout, d.ot, d.oh, d.ow};
  NodePtr<T> xn = x.node();
  NodePtr<T> kn = kernels.node();
  NodePtr<T> bn = has_bias ? bias.node() : nullptr;
  std::vector<NodePtr<T>> inputs{xn, kn};
  if (bn) inputs.push_back(bn);
  return make_result<T>("conv3d", std::move(out_shape), std::move(out), std::move(inputs),
                        [xn, kn, bn, d, algo](const TensorNode<T>& o) {
                          T* gx = xn->requires_grad ? xn->grad.data() : nullptr;
                          T* gk = kn->requires_grad ? kn->grad.data() : nullptr;
                          if (algo == ConvAlgo::Direct)
                            conv_direct_backward(d, xn->data.data(), kn->data.data(), o.grad.data(), gx, gk);
                          else
                            conv_im2col_backward(d, xn->data.data(), kn->data.data(), o.grad.data(), gx, gk);
                          if (bn && bn->requires_grad) {
                            const std::size_t pv = d.out_volume();
                            for (std::size_t b = 0; b < d.n; ++b)
                              for (std::size_t co = 0; co < d.cout; ++co)
                                bn->grad[co] += kernels::sum<T>(o.grad.data() + (b * d.cout + co) * pv, pv);
                          }
                        });
}

template <class T>
Tensor<T> adaptive_avg_pool3d(const Tensor<T>& x, Triple out_extent) {
  const bool batched = x.ndim() == 5;
  if (!(batched || x.ndim() == 4))
    throw DimensionError("adaptive_avg_pool3d: expected [N,C,T,H,W] or [C,T,H,W], got " + shape_str(x.shape()));
  const Shape& xs = x.shape();
  const std::size_t off = batched ? 2 : 1;
  const Triple in{xs[off], xs[off + 1], xs[off + 2]};
  for (std::size_t a = 0; a < 3; ++a) {
    if (out_extent[a] == 0) throw ContractError("adaptive_avg_pool3d: zero output extent");
    if (out_extent[a] > in[a])
      throw DimensionError("adaptive_avg_pool3d: output extent exceeds input " + shape_str(xs));
  }
  std::size_t planes = 1;
  for (std::size_t i = 0; i < off; ++i) planes *= xs[i];
  std::array<std::vector<std::pair<std::size_t, std::size_t>>, 3> bins;
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t i = 0; i < out_extent[a]; ++i)
      bins[a].emplace_back(i * in[a] / out_extent[a], ((i + 1) * in[a] + out_extent[a] - 1) / out_extent[a]);

  const std::size_t in_vol = in[0] * in[1] * in[2];
  const std::size_t out_vol = out_extent[0] * out_extent[1] * out_extent[2];
  std::vector<T> out(planes * out_vol);
  const auto& xv = x.node()->data;
  auto for_each_bin = [bins, in, out_extent](auto&& fn) {
    std::size_t o = 0;
    for (std::size_t i = 0; i < out_extent[0]; ++i)
      for (std::size_t j = 0; j < out_extent[1]; ++j)
        for (std::size_t k = 0; k < out_extent[2]; ++k, ++o) {
          const auto [t0, t1] = bins[0][i];
          const auto [h0, h1] = bins[1][j];
          const auto [w0, w1] = bins[2][k];
          const std::size_t count = (t1 - t0) * (h1 - h0) * (w1 - w0);
          for (std::size_t t = t0; t < t1; ++t)
            for (std::size_t h = h0; h < h1; ++h)
              for (std::size_t w = w0; w < w1; ++w) fn(o, (t * in[1] + h) * in[2] + w, count);
        }
  };
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv.data() + p * in_vol;
    T* dst = out.data() + p * out_vol;
    for_each_bin([&](std::size_t o, std::size_t i, std::size_t count) {
      dst[o] += src[i] / static_cast<T>(count);
    });
  }
  Shape out_shape(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(off));
  out_shape.insert(out_shape.end(), out_extent.begin(), out_extent.end());
  NodePtr<T> xn = x.node();
  return make_result<T>("adaptive_avg_pool3d", std::move(out_shape), std::move(out), {xn},
                        [xn, planes, in_vol, out_vol, for_each_bin](const TensorNode<T>& o) {
                          for (std::size_t p = 0; p < planes; ++p) {
                            const T* g = o.grad.data() + p * out_vol;
                            T* dst = xn->grad.data() + p * in_vol;
                            for_each_bin([&](std::size_t oi, std::size_t i, std::size_t count) {
                              dst[i] += g[oi] / static_cast<T>(count);
                            });
                          }
                        });
}

#define SHOTFUSE_INSTANTIATE(T)                                                                    \
  template Tensor<T> activate(const Tensor<T>&, Activation, T);                                    \
  template Tensor<T> glorot_uniform<T>(Shape, std::size_t, std::size_t, Rng&);                     \
  template struct LinearParams<T>;                                                                 \
  template Tensor<T> linear(const Tensor<T>&, const LinearParams<T>&);                             \
  template struct BatchNormState<T>;                                                               \
  template Tensor<T> batchnorm(const Tensor<T>&, BatchNormState<T>&, Mode);                        \
  template Tensor<T> dropout(const Tensor<T>&, double, Mode, Rng&);                                \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                  \
                            const Conv3dGeometry&, ConvAlgo);                                      \
  template Tensor<T> adaptive_avg_pool3d(const Tensor<T>&, Triple);
SHOTFUSE_INSTANTIATE(float)
SHOTFUSE_INSTANTIATE(double)
#undef SHOTFUSE_INSTANTIATE

}  // namespace shotfuse
