#include "shotfuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace shotfuse {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

template <class T>
Tensor<T> finite_diff_grad(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h) {
  if (!(h > T(0))) throw ContractError("finite_diff_grad: step must be positive");
  NoGradGuard guard;
  Tensor<T> probe = x.detach();
  std::vector<T> out(x.numel());
  auto values = probe.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T saved = values[i];
    values[i] = saved + h;
    const T fp = f(probe);
    values[i] = saved - h;
    const T fm = f(probe);
    values[i] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      std::ostringstream os;
      os << "finite_diff_grad: non-finite evaluation at element " << i;
      throw NumericError(os.str());
    }
    out[i] = (fp - fm) / (T(2) * h);
  }
  return Tensor<T>::from(x.shape(), std::move(out));
}

template <class T>
GradCheckReport check_gradients(const std::function<Tensor<T>()>& loss_fn,
                                std::vector<std::pair<std::string, Tensor<T>>> params, T h,
                                std::size_t max_probes) {
  reset_tape<T>();
  for (auto& [name, p] : params) p.zero_grad();
  Tensor<T> loss = loss_fn();
  backward(loss);
  std::vector<std::vector<T>> analytic;
  for (auto& [name, p] : params) {
    if (p.has_grad())
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    else
      analytic.emplace_back(p.numel(), T(0));
  }
  reset_tape<T>();

  GradCheckReport report;
  NoGradGuard guard;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].second.mutable_data();
    GradCheckEntry entry{params[pi].first, 0.0, 0};
    std::vector<std::size_t> probes;
    if (max_probes == 0 || values.size() <= max_probes) {
      probes.resize(values.size());
      for (std::size_t i = 0; i < probes.size(); ++i) probes[i] = i;
    } else {
      const std::size_t stride = values.size() / max_probes;
      for (std::size_t q = 0; q < max_probes; ++q) probes.push_back(q * stride + (q * 7) % stride);
      const auto& a = analytic[pi];
      probes.push_back(static_cast<std::size_t>(std::max_element(a.begin(), a.end(), [](T x, T y) {
                                                  return std::abs(x) < std::abs(y);
                                                }) - a.begin()));
    }
    for (std::size_t i : probes) {
      const T saved = values[i];
      values[i] = saved + h;
      const T fp = loss_fn().item();
      values[i] = saved - h;
      const T fm = loss_fn().item();
      values[i] = saved;
      const double numeric = (static_cast<double>(fp) - static_cast<double>(fm)) / (2.0 * h);
      const double err = std::abs(static_cast<double>(analytic[pi][i]) - numeric) /
                         std::max(1.0, std::abs(numeric));
      if (err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
      }
    }
    report.entries.push_back(entry);
  }
  return report;
}

template Tensor<float> finite_diff_grad<float>(const std::function<float(const Tensor<float>&)>&,
                                               const Tensor<float>&, float);
template Tensor<double> finite_diff_grad<double>(const std::function<double(const Tensor<double>&)>&,
                                                 const Tensor<double>&, double);
template GradCheckReport check_gradients<float>(const std::function<Tensor<float>()>&,
                                                std::vector<std::pair<std::string, Tensor<float>>>, float,
                                                std::size_t);
template GradCheckReport check_gradients<double>(const std::function<Tensor<double>()>&,
                                                 std::vector<std::pair<std::string, Tensor<double>>>,
                                                 double, std::size_t);

}  // namespace shotfuse
