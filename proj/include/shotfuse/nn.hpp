#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "shotfuse/ops.hpp"
#include "shotfuse/rng.hpp"
#include "shotfuse/tensor.hpp"

namespace shotfuse {

enum class Mode { Train, Eval };

enum class Activation { Relu, LeakyRelu, Swish, Sigmoid };

std::string_view activation_name(Activation kind);
/// Accepts relu, leaky_relu, swish, sigmoid. Throws ConfigError otherwise.
Activation parse_activation(std::string_view name);

inline constexpr double kDefaultLeakySlope = 0.01;

template <class T>
Tensor<T> activate(const Tensor<T>& x, Activation kind, T leaky_slope = T(kDefaultLeakySlope));

/// Glorot-uniform fill: U(-b, b), b = sqrt(6 / (fan_in + fan_out)).
template <class T>
Tensor<T> glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

template <class T>
struct LinearParams {
  Tensor<T> weight;  // [out, in]
  Tensor<T> bias;    // [out]

  static LinearParams init(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_features() const { return weight.shape()[1]; }
  std::size_t out_features() const { return weight.shape()[0]; }
};

/// x W^T + b over the last axis of x ([in] or [N, in]).
template <class T>
Tensor<T> linear(const Tensor<T>& x, const LinearParams<T>& p);

template <class T>
struct BatchNormState {
  Tensor<T> gamma;  // [C]
  Tensor<T> beta;   // [C]
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNormState init(std::size_t channels);
  std::size_t channels() const { return running_mean.size(); }
};

/// Per-channel normalization of x shaped [N, C, ...]. Train mode uses batch
/// statistics over every axis except 1 and updates the running statistics
/// (unbiased variance); eval mode uses only the running statistics.
/// Train mode needs at least two values per channel.
template <class T>
Tensor<T> batchnorm(const Tensor<T>& x, BatchNormState<T>& state, Mode mode);

/// Inverted dropout. Identity in eval mode or when rate == 0.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng);

using Triple = std::array<std::size_t, 3>;

enum class ConvAlgo { Direct, Im2col };

struct Conv3dGeometry {
  Triple stride{1, 1, 1};
  Triple padding{0, 0, 0};
};

/// Output extent floor((d + 2p - k) / s) + 1; throws when the kernel does not
/// fit the padded input.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// Cross-correlation of x [N, Cin, T, H, W] (or [Cin, T, H, W]) with kernels
/// [Cout, Cin, kt, kh, kw]. `bias` may be undefined.
template <class T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias,
                 const Conv3dGeometry& geom, ConvAlgo algo = ConvAlgo::Im2col);

/// Averages x [N, C, T, H, W] (or [C, T, H, W]) over the bins
/// [floor(i*D/O), ceil((i+1)*D/O)) on each spatiotemporal axis.
template <class T>
Tensor<T> adaptive_avg_pool3d(const Tensor<T>& x, Triple out_extent);

}  // namespace shotfuse
