#pragma once

// Central finite differences: the oracle every backward rule is checked against.

#include <functional>
#include <string>
#include <vector>

#include "shotfuse/tensor.hpp"

namespace shotfuse {

/// (f(x + h e_i) - f(x - h e_i)) / 2h for every element i of x.
/// Throws NumericError naming the element when f is non-finite there.
template <class T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h);

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;  // max |analytic - numeric| / max(1, |numeric|)
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error() const;
};

/// Compares tape gradients of `loss_fn` against finite differences for every
/// named leaf in `params`. `loss_fn` must rebuild the forward pass from the
/// current parameter values each time it is called; it is evaluated with the
/// tape reset beforehand. With `max_probes` > 0, larger leaves are checked at
/// that many evenly strided elements plus the element with the largest
/// analytic gradient.
template <class T>
GradCheckReport check_gradients(const std::function<Tensor<T>()>& loss_fn,
                                std::vector<std::pair<std::string, Tensor<T>>> params, T h,
                                std::size_t max_probes = 0);

}  // namespace shotfuse
