#include "shotfuse/fusion.hpp"

#include "../core/op_support.hpp"

namespace shotfuse {

using detail::make_result;
using detail::NodePtr;

template <class T>
FusionParams<T> FusionParams<T>::init(FusionMode mode, std::size_t dim, Rng& rng) {
  FusionParams p;
  p.mode = mode;
  if (mode == FusionMode::Gated)
    p.gate = LinearParams<T>::init(2 * dim, 1, rng);
  else
    p.global_logit = Tensor<T>::zeros({1}, true);
  return p;
}

template <class T>
Tensor<T> gate_alpha(const Tensor<T>& f_vis, const Tensor<T>& f_land, const FusionParams<T>& p) {
  if (f_vis.shape() != f_land.shape() || f_vis.ndim() < 1 || f_vis.ndim() > 2)
    throw DimensionError("gate_alpha: embeddings " + shape_str(f_vis.shape()) + " and " +
                         shape_str(f_land.shape()) + " must match as [D] or [N, D]");
  const std::size_t n = f_vis.ndim() == 2 ? f_vis.shape()[0] : 1;
  if (p.mode == FusionMode::Global) {
    Tensor<T> a = sigmoid(p.global_logit);
    if (n == 1) return a;
    return reshape(concat<T>(std::vector<Tensor<T>>(n, a), 0), {n});
  }
  Tensor<T> logit = linear(concat_fuse(f_vis, f_land), p.gate);
  return sigmoid(reshape(logit, {n}));
}

template <class T>
Tensor<T> fuse(const Tensor<T>& f_vis, const Tensor<T>& f_land, const Tensor<T>& alpha) {
  if (f_vis.shape() != f_land.shape())
    throw DimensionError("fuse: embeddings " + shape_str(f_vis.shape()) + " and " + shape_str(f_land.shape()) +
                         " differ");
  const std::size_t rows = f_vis.ndim() == 2 ? f_vis.shape()[0] : 1;
  if (f_vis.ndim() < 1 || f_vis.ndim() > 2 || alpha.ndim() != 1 || alpha.numel() != rows)
    throw DimensionError("fuse: alpha " + shape_str(alpha.shape()) + " does not match embeddings " +
                         shape_str(f_vis.shape()));
  const std::size_t dim = f_vis.shape().back();
  const T* v = f_vis.data().data();
  const T* l = f_land.data().data();
  const T* a = alpha.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    if (!(a[r] >= T(0) && a[r] <= T(1))) throw DomainError("fuse: alpha outside [0, 1]");
  std::vector<T> out(f_vis.numel());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t d = 0; d < dim; ++d) {
      const std::size_t i = r * dim + d;
      out[i] = v[i] == l[i] ? v[i] : a[r] * v[i] + (T(1) - a[r]) * l[i];
    }
  NodePtr<T> vn = f_vis.node(), ln = f_land.node(), an = alpha.node();
  return make_result<T>("fuse", f_vis.shape(), std::move(out), {vn, ln, an},
                        [vn, ln, an, rows, dim](const TensorNode<T>& o) {
                          for (std::size_t r = 0; r < rows; ++r) {
                            const T ar = an->data[r];
                            T ga = 0;
                            for (std::size_t d = 0; d < dim; ++d) {
                              const std::size_t i = r * dim + d;
                              const T g = o.grad[i];
                              if (vn->requires_grad) vn->grad[i] += ar * g;
                              if (ln->requires_grad) ln->grad[i] += (T(1) - ar) * g;
                              ga += g * (vn->data[i] - ln->data[i]);
                            }
                            if (an->requires_grad) an->grad[r] += ga;
                          }
                        });
}

template <class T>
Tensor<T> concat_fuse(const Tensor<T>& f_vis, const Tensor<T>& f_land) {
  return concat<T>({f_vis, f_land}, -1);
}

template <class T>
HeadParams<T> HeadParams<T>::init(std::size_t in, std::size_t dim, Rng& rng) {
  if (dim < 4 || dim % 4 != 0) throw ConfigError("head width " + std::to_string(dim) + " must be a multiple of 4");
  HeadParams p;
  p.fc1 = LinearParams<T>::init(in, dim / 2, rng);
  p.bn1 = BatchNormState<T>::init(dim / 2);
  p.fc2 = LinearParams<T>::init(dim / 2, dim / 4, rng);
  p.bn2 = BatchNormState<T>::init(dim / 4);
  p.out = LinearParams<T>::init(dim / 4, 2, rng);
  return p;
}

template <class T>
Tensor<T> reduce_head(const Tensor<T>& x, HeadParams<T>& p, Mode mode, Activation act, T leaky_slope, Rng& rng) {
  if (x.ndim() != 2) throw DimensionError("reduce_head: expected [N, in], got " + shape_str(x.shape()));
  Tensor<T> h = activate(batchnorm(linear(x, p.fc1), p.bn1, mode), act, leaky_slope);
  h = dropout(h, p.dropout, mode, rng);
  h = activate(batchnorm(linear(h, p.fc2), p.bn2, mode), act, leaky_slope);
  h = dropout(h, p.dropout, mode, rng);
  return linear(h, p.out);
}

template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  const bool batched = logits.ndim() == 2;
  const std::size_t n = batched ? logits.shape()[0] : 1;
  if (!(batched || logits.ndim() == 1) || logits.shape().back() != 2)
    throw DimensionError("cross_entropy: expected [2] or [N, 2] logits, got " + shape_str(logits.shape()));
  if (labels.size() != n)
    throw DimensionError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                         " rows");
  std::vector<T> pick(2 * n, T(0));
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] != 0 && labels[r] != 1)
      throw DomainError("cross_entropy: label " + std::to_string(labels[r]) + " is not 0 or 1");
    pick[2 * r + static_cast<std::size_t>(labels[r])] = T(-1) / static_cast<T>(n);
  }
  Tensor<T> selector = Tensor<T>::from(logits.shape(), std::move(pick));
  return sum(mul(log_softmax(logits, -1), selector));
}

#define SHOTFUSE_INSTANTIATE(T)                                                                     \
  template struct FusionParams<T>;                                                                  \
  template Tensor<T> gate_alpha(const Tensor<T>&, const Tensor<T>&, const FusionParams<T>&);        \
  template Tensor<T> fuse(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> concat_fuse(const Tensor<T>&, const Tensor<T>&);                               \
  template struct HeadParams<T>;                                                                    \
  template Tensor<T> reduce_head(const Tensor<T>&, HeadParams<T>&, Mode, Activation, T, Rng&);      \
  template Tensor<T> cross_entropy(const Tensor<T>&, const std::vector<int>&);
SHOTFUSE_INSTANTIATE(float)
SHOTFUSE_INSTANTIATE(double)
#undef SHOTFUSE_INSTANTIATE

}  // namespace shotfuse
