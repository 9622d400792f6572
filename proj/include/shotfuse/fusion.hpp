#pragma once

// Gated fusion of the two branch embeddings, the reduction head and the loss.

#include <vector>

#include "shotfuse/nn.hpp"

namespace shotfuse {

enum class FusionMode { Gated, Global };

template <class T>
struct FusionParams {
  FusionMode mode = FusionMode::Gated;
  LinearParams<T> gate;  // [1, 2D], gated mode
  Tensor<T> global_logit;  // [1], global mode

  static FusionParams init(FusionMode mode, std::size_t dim, Rng& rng);
};

/// alpha per sample: sigmoid(gate([F_vis || F_land])) in gated mode,
/// sigmoid(global_logit) broadcast over the batch in global mode.
/// Inputs [D] give [1]; inputs [N, D] give [N].
template <class T>
Tensor<T> gate_alpha(const Tensor<T>& f_vis, const Tensor<T>& f_land, const FusionParams<T>& p);

/// alpha * F_vis + (1 - alpha) * F_land with alpha [1] or [N] against [D] or [N, D].
/// Components where both embeddings agree are copied through unchanged.
template <class T>
Tensor<T> fuse(const Tensor<T>& f_vis, const Tensor<T>& f_land, const Tensor<T>& alpha);

/// [F_vis || F_land] along the last axis.
template <class T>
Tensor<T> concat_fuse(const Tensor<T>& f_vis, const Tensor<T>& f_land);

template <class T>
struct HeadParams {
  LinearParams<T> fc1;  // in -> D/2
  BatchNormState<T> bn1;
  LinearParams<T> fc2;  // D/2 -> D/4
  BatchNormState<T> bn2;
  LinearParams<T> out;  // D/4 -> 2
  double dropout = 0.5;

  /// `in` is D, or 2D for the concatenation variant.
  static HeadParams init(std::size_t in, std::size_t dim, Rng& rng);
};

/// fc1 -> BN -> act -> dropout -> fc2 -> BN -> act -> dropout -> out over [N, in].
template <class T>
Tensor<T> reduce_head(const Tensor<T>& x, HeadParams<T>& p, Mode mode, Activation act, T leaky_slope, Rng& rng);

/// Mean over the batch of -log softmax(logits)[label]; logits [2] or [N, 2].
/// Labels must be 0 (sober) or 1 (intoxicated).
template <class T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels);

}  // namespace shotfuse
