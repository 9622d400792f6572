#pragma once

// Visual pathway: a small R3D-style residual 3D CNN over clips, global
// average pooling, projection to the common width, and mean pooling over shots.

#include <optional>
#include <string>
#include <vector>

#include "shotfuse/nn.hpp"

namespace shotfuse {

/// One shot's frame volume, channel-major [C, T, H, W], values in [0, 1].
struct Clip {
  std::size_t channels = 0;
  std::size_t frames = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> voxels;
  std::string shot_id;

  std::size_t size() const { return channels * frames * height * width; }
  float at(std::size_t c, std::size_t t, std::size_t y, std::size_t x) const {
    return voxels[((c * frames + t) * height + y) * width + x];
  }
};

/// Uniform temporal sampling (frame floor((i + 0.5) * T_in / T)) and bilinear
/// spatial resize with half-pixel centers.
Clip resample_clip(const Clip& src, std::size_t frames, std::size_t height, std::size_t width);

template <class T>
Tensor<T> clip_tensor(const Clip& clip);

struct R3DConfig {
  std::size_t in_channels = 3;
  std::size_t stem_width = 8;
  Triple stem_kernel{3, 7, 7};
  Triple stem_stride{1, 2, 2};
  Triple stem_padding{1, 3, 3};
  /// Output channels of each stage; every stage after the first halves T, H, W.
  std::vector<std::size_t> stage_widths{8, 16};
  std::vector<std::size_t> stage_blocks{1, 1};
  std::size_t embed_dim = 64;
  Activation activation = Activation::LeakyRelu;
  double leaky_slope = kDefaultLeakySlope;
};

template <class T>
struct ResidualBlock3dParams {
  Tensor<T> conv1;  // [out, in, 3, 3, 3]
  BatchNormState<T> bn1;
  Tensor<T> conv2;  // [out, out, 3, 3, 3]
  BatchNormState<T> bn2;
  /// 1x1x1 projection shortcut, present when stride or width changes.
  std::optional<Tensor<T>> down_conv;
  std::optional<BatchNormState<T>> down_bn;
  std::size_t stride = 1;

  static ResidualBlock3dParams init(std::size_t in, std::size_t out, std::size_t stride, Rng& rng);
};

template <class T>
struct R3DParams {
  R3DConfig config;
  Tensor<T> stem_conv;
  BatchNormState<T> stem_bn;
  std::vector<ResidualBlock3dParams<T>> blocks;  // stages flattened in order
  LinearParams<T> projection;                    // [D, last width]

  static R3DParams init(const R3DConfig& config, Rng& rng);
};

/// act(BN(conv(act(BN(conv(x))))) + shortcut(x)) over [N, C, T, H, W].
template <class T>
Tensor<T> residual_block3d(const Tensor<T>& x, ResidualBlock3dParams<T>& p, Mode mode,
                           Activation act, T leaky_slope, ConvAlgo algo = ConvAlgo::Im2col);

/// Clip embedding v_k: stem, residual stages, global average pool, linear to D.
/// Accepts [C, T, H, W] (returns [D]) or [N, C, T, H, W] (returns [N, D]).
/// `last_stage` receives the final stage activation [N, C', T', H', W'].
template <class T>
Tensor<T> r3d_forward(const Tensor<T>& clip, R3DParams<T>& p, Mode mode,
                      ConvAlgo algo = ConvAlgo::Im2col, Tensor<T>* last_stage = nullptr);

/// F_vis: elementwise mean of the per-shot clip embeddings.
template <class T>
Tensor<T> shots_mean_pool(const std::vector<Tensor<T>>& embeddings);

}  // namespace shotfuse
