#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "shotfuse/gradcheck.hpp"
#include "shotfuse/rng.hpp"
#include "shotfuse/tensor.hpp"

namespace shotfuse::testing {

using TensorD = Tensor<double>;

inline TensorD random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0,
                             bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return TensorD::from(std::move(shape), std::move(v), requires_grad);
}

inline constexpr double kGradTol = 1e-6;
inline constexpr double kStep = 1e-5;

/// Finite-difference check of every named leaf; fails the test with the worst
/// parameter when any relative error exceeds `tol`.
inline double expect_gradients(const std::function<TensorD()>& loss_fn,
                               std::vector<std::pair<std::string, TensorD>> params,
                               double tol = kGradTol, std::size_t max_probes = 0) {
  const GradCheckReport report = check_gradients<double>(loss_fn, std::move(params), kStep, max_probes);
  for (const auto& e : report.entries) {
    INFO("parameter " << e.name << " worst index " << e.worst_index << " rel error " << e.max_rel_error);
    CHECK(e.max_rel_error < tol);
  }
  reset_tape<double>();
  return report.max_rel_error();
}

/// Scalar reduction with distinct weights per element so that every output
/// coordinate contributes a different amount to the checked loss.
inline TensorD weighted_sum(const TensorD& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.7 * std::sin(1.3 * static_cast<double>(i) + 0.2);
  TensorD weights = TensorD::from(y.shape(), std::move(w));
  return sum(mul(y, weights));
}

}  // namespace shotfuse::testing
