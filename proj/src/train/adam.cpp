#include <cmath>

#include "shotfuse/train.hpp"

namespace shotfuse {

template <class T>
AdamState<T> AdamState<T>::init(const std::vector<std::pair<std::string, Tensor<T>>>& params,
                                const AdamConfig& config) {
  AdamState s;
  s.config = config;
  for (const auto& [name, p] : params) {
    s.names.push_back(name);
    s.m.emplace_back(p.numel(), T(0));
    s.v.emplace_back(p.numel(), T(0));
  }
  return s;
}

template <class T>
void adam_step(const std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& state) {
  if (params.size() != state.m.size())
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters for a state of " +
                         std::to_string(state.m.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, p] = params[i];
    if (name != state.names[i] || p.numel() != state.m[i].size())
      throw DimensionError("adam_step: parameter '" + name + "' " + shape_str(p.shape()) +
                           " does not match optimizer slot '" + state.names[i] + "'");
    if (p.has_grad())
      for (T g : p.grad())
        if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in '" + name + "'");
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T> p = params[i].second;
    auto values = p.mutable_data();
    const bool has_grad = p.has_grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = has_grad ? static_cast<double>(p.grad()[j]) : 0.0;
      double w = static_cast<double>(values[j]);
      w -= c.lr * c.weight_decay * w;
      const double mj = c.beta1 * static_cast<double>(m[j]) + (1.0 - c.beta1) * g;
      const double vj = c.beta2 * static_cast<double>(v[j]) + (1.0 - c.beta2) * g * g;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      w -= c.lr * (mj / correction1) / (std::sqrt(vj / correction2) + c.eps);
      values[j] = static_cast<T>(w);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(const std::vector<std::pair<std::string, Tensor<float>>>&, AdamState<float>&);
template void adam_step(const std::vector<std::pair<std::string, Tensor<double>>>&, AdamState<double>&);

}  // namespace shotfuse
