#include "shotfuse/visual_branch.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace shotfuse {

Clip resample_clip(const Clip& src, std::size_t frames, std::size_t height, std::size_t width) {
  if (src.size() == 0 || src.voxels.size() != src.size())
    throw ContractError("resample_clip: source clip '" + src.shot_id + "' is empty or inconsistent");
  if (frames == 0 || height == 0 || width == 0) throw ContractError("resample_clip: zero target extent");
  Clip out;
  out.channels = src.channels;
  out.frames = frames;
  out.height = height;
  out.width = width;
  out.shot_id = src.shot_id;
  out.voxels.resize(out.size());
  auto source_coord = [](std::size_t i, std::size_t in, std::size_t outn) {
    const double pos = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(outn) - 0.5;
    const double clamped = std::clamp(pos, 0.0, static_cast<double>(in - 1));
    const auto lo = static_cast<std::size_t>(std::floor(clamped));
    const std::size_t hi = std::min(lo + 1, in - 1);
    return std::tuple{lo, hi, clamped - static_cast<double>(lo)};
  };
  for (std::size_t c = 0; c < out.channels; ++c)
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t st = std::min(
          src.frames - 1, static_cast<std::size_t>((static_cast<double>(t) + 0.5) * src.frames / frames));
      for (std::size_t y = 0; y < height; ++y) {
        const auto [y0, y1, fy] = source_coord(y, src.height, height);
        for (std::size_t x = 0; x < width; ++x) {
          const auto [x0, x1, fx] = source_coord(x, src.width, width);
          const double top = (1 - fx) * src.at(c, st, y0, x0) + fx * src.at(c, st, y0, x1);
          const double bottom = (1 - fx) * src.at(c, st, y1, x0) + fx * src.at(c, st, y1, x1);
          out.voxels[((c * frames + t) * height + y) * width + x] = static_cast<float>((1 - fy) * top + fy * bottom);
        }
      }
    }
  return out;
}

template <class T>
Tensor<T> clip_tensor(const Clip& clip) {
  if (clip.voxels.size() != clip.size() || clip.size() == 0)
    throw ContractError("clip '" + clip.shot_id + "' has " + std::to_string(clip.voxels.size()) +
                        " voxels for extents " + shape_str({clip.channels, clip.frames, clip.height, clip.width}));
  std::vector<T> values(clip.voxels.begin(), clip.voxels.end());
  return Tensor<T>::from({clip.channels, clip.frames, clip.height, clip.width}, std::move(values));
}

namespace {

template <class T>
Tensor<T> conv_kernel(std::size_t out, std::size_t in, Triple k, Rng& rng) {
  const std::size_t vol = k[0] * k[1] * k[2];
  return glorot_uniform<T>({out, in, k[0], k[1], k[2]}, in * vol, out * vol, rng);
}

}  // namespace

template <class T>
ResidualBlock3dParams<T> ResidualBlock3dParams<T>::init(std::size_t in, std::size_t out, std::size_t stride,
                                                        Rng& rng) {
  if (stride == 0) throw ConfigError("residual block stride must be positive");
  ResidualBlock3dParams p;
  p.conv1 = conv_kernel<T>(out, in, {3, 3, 3}, rng);
  p.bn1 = BatchNormState<T>::init(out);
  p.conv2 = conv_kernel<T>(out, out, {3, 3, 3}, rng);
  p.bn2 = BatchNormState<T>::init(out);
  p.stride = stride;
  if (stride != 1 || in != out) {
    p.down_conv = conv_kernel<T>(out, in, {1, 1, 1}, rng);
    p.down_bn = BatchNormState<T>::init(out);
  }
  return p;
}

template <class T>
R3DParams<T> R3DParams<T>::init(const R3DConfig& config, Rng& rng) {
  if (config.stage_widths.empty() || config.stage_widths.size() != config.stage_blocks.size())
    throw ConfigError("R3D stage widths and block counts must be nonempty and of equal length");
  if (config.embed_dim == 0) throw ConfigError("R3D embedding width must be positive");
  R3DParams p;
  p.config = config;
  p.stem_conv = conv_kernel<T>(config.stem_width, config.in_channels, config.stem_kernel, rng);
  p.stem_bn = BatchNormState<T>::init(config.stem_width);
  std::size_t width = config.stem_width;
  for (std::size_t s = 0; s < config.stage_widths.size(); ++s) {
    if (config.stage_blocks[s] == 0) throw ConfigError("R3D stage " + std::to_string(s) + " has no blocks");
    for (std::size_t b = 0; b < config.stage_blocks[s]; ++b) {
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      p.blocks.push_back(ResidualBlock3dParams<T>::init(width, config.stage_widths[s], stride, rng));
      width = config.stage_widths[s];
    }
  }
  p.projection = LinearParams<T>::init(width, config.embed_dim, rng);
  return p;
}

template <class T>
Tensor<T> residual_block3d(const Tensor<T>& x, ResidualBlock3dParams<T>& p, Mode mode, Activation act,
                           T leaky_slope, ConvAlgo algo) {
  const Triple s{p.stride, p.stride, p.stride};
  Tensor<T> h = conv3d(x, p.conv1, Tensor<T>(), Conv3dGeometry{s, {1, 1, 1}}, algo);
  h = activate(batchnorm(h, p.bn1, mode), act, leaky_slope);
  h = conv3d(h, p.conv2, Tensor<T>(), Conv3dGeometry{{1, 1, 1}, {1, 1, 1}}, algo);
  h = batchnorm(h, p.bn2, mode);
  Tensor<T> shortcut = x;
  if (p.down_conv) {
    shortcut = conv3d(x, *p.down_conv, Tensor<T>(), Conv3dGeometry{s, {0, 0, 0}}, algo);
    shortcut = batchnorm(shortcut, *p.down_bn, mode);
  }
  if (shortcut.shape() != h.shape())
    throw DimensionError("residual_block3d: shortcut " + shape_str(shortcut.shape()) + " does not match residual " +
                         shape_str(h.shape()));
  return activate(add(h, shortcut), act, leaky_slope);
}

template <class T>
Tensor<T> r3d_forward(const Tensor<T>& clip, R3DParams<T>& p, Mode mode, ConvAlgo algo, Tensor<T>* last_stage) {
  const bool batched = clip.ndim() == 5;
  if (!batched && clip.ndim() != 4) throw DimensionError("r3d_forward: expected a clip, got " + shape_str(clip.shape()));
  const std::size_t channels = clip.shape()[batched ? 1 : 0];
  if (channels != p.config.in_channels)
    throw DimensionError("r3d_forward: clip " + shape_str(clip.shape()) + " has " + std::to_string(channels) +
                         " channels, backbone expects " + std::to_string(p.config.in_channels));
  Shape batch_shape = clip.shape();
  if (!batched) batch_shape.insert(batch_shape.begin(), 1);
  const std::size_t n = batch_shape[0];
  const R3DConfig& cfg = p.config;
  const T slope = static_cast<T>(cfg.leaky_slope);

  Tensor<T> h = batched ? clip : reshape(clip, batch_shape);
  h = conv3d(h, p.stem_conv, Tensor<T>(), Conv3dGeometry{cfg.stem_stride, cfg.stem_padding}, algo);
  h = activate(batchnorm(h, p.stem_bn, mode), cfg.activation, slope);
  for (auto& block : p.blocks) h = residual_block3d(h, block, mode, cfg.activation, slope, algo);
  if (last_stage) *last_stage = h;
  const std::size_t width = h.shape()[1];
  Tensor<T> pooled = reshape(adaptive_avg_pool3d(h, Triple{1, 1, 1}), {n, width});
  Tensor<T> v = linear(pooled, p.projection);
  return batched ? v : reshape(v, {cfg.embed_dim});
}

template <class T>
Tensor<T> shots_mean_pool(const std::vector<Tensor<T>>& embeddings) {
  return mean_pool(embeddings);
}

#define SHOTFUSE_INSTANTIATE(T)                                                                       \
  template Tensor<T> clip_tensor<T>(const Clip&);                                                     \
  template struct ResidualBlock3dParams<T>;                                                           \
  template struct R3DParams<T>;                                                                       \
  template Tensor<T> residual_block3d(const Tensor<T>&, ResidualBlock3dParams<T>&, Mode, Activation, T, \
                                      ConvAlgo);                                                      \
  template Tensor<T> r3d_forward(const Tensor<T>&, R3DParams<T>&, Mode, ConvAlgo, Tensor<T>*);        \
  template Tensor<T> shots_mean_pool(const std::vector<Tensor<T>>&);
SHOTFUSE_INSTANTIATE(float)
SHOTFUSE_INSTANTIATE(double)
#undef SHOTFUSE_INSTANTIATE

}  // namespace shotfuse
