#pragma once

// Landmark pathway: fixed 68-node facial graph, per-frame graph attention,
// shot pooling, and LSTM -> GRU aggregation across shots.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "shotfuse/nn.hpp"

namespace shotfuse {

inline constexpr std::size_t kLandmarkCount = 68;

struct FacialGraph {
  std::size_t node_count = 0;
  /// Undirected edges with u <= v, self-loops included, sorted.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  /// Sorted neighbor lists; every list contains the node itself.
  std::vector<std::vector<std::size_t>> neighbors;

  /// Symmetrizes `edges` and adds a self-loop on every node.
  static FacialGraph from_edges(std::size_t node_count,
                                const std::vector<std::pair<std::size_t, std::size_t>>& edges);
  bool has_edge(std::size_t u, std::size_t v) const;
  bool connected() const;
};

/// iBUG-68 anatomy: region chains and cycles plus bridge edges.
FacialGraph build_facial_graph();

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct LandmarkFrame {
  std::array<Point2, kLandmarkCount> coords{};
  bool valid = true;
};

struct LandmarkShot {
  std::vector<LandmarkFrame> frames;
  std::string shot_id;
};

/// Centers on the centroid and scales the inter-ocular distance (mean of
/// nodes 36-41 to mean of nodes 42-47) to 1. Falls back to the bounding-box
/// diagonal when the eye centers coincide; identical points throw GeometryError.
LandmarkFrame normalize_landmarks(const LandmarkFrame& frame);

enum class Eye { Right, Left };  // right: nodes 36-41, left: nodes 42-47

/// (|p2-p6| + |p3-p5|) / (2 |p1-p4|) over the eye's six-point cycle.
double compute_ear(const LandmarkFrame& frame, Eye eye);
/// (|p50-p58| + |p52-p56|) / (2 |p48-p54|) over the outer lip.
double compute_mar(const LandmarkFrame& frame);

/// [F, 68, 2] tensor of a shot's raw coordinates.
template <class T>
Tensor<T> shot_coordinates(const LandmarkShot& shot, bool requires_grad = false);

/// Differentiable `normalize_landmarks` over [F, 68, 2]. For frames using the
/// bounding-box fallback the scale is treated as a constant.
template <class T>
Tensor<T> normalize_frames(const Tensor<T>& coords);

/// Node inputs [F, 68, 2] (normalized xy) or [F, 68, 4] (xy plus
/// `velocity_scale` * (xy_t - xy_{t-1}); zero for the first frame).
template <class T>
Tensor<T> node_features(const Tensor<T>& normalized, bool with_velocity, T velocity_scale);

template <class T>
struct GatParams {
  Tensor<T> weight;     // [heads * head_dim, in]; head h owns rows [h*head_dim, (h+1)*head_dim)
  Tensor<T> attention;  // [heads, 2 * head_dim]; first half scores the target, second the neighbor
  std::size_t heads = 1;

  static GatParams init(std::size_t in, std::size_t out, std::size_t heads, Rng& rng);
  std::size_t out_features() const { return weight.shape()[0]; }
  std::size_t head_dim() const { return weight.shape()[0] / heads; }
};

struct GatOptions {
  double attention_slope = 0.2;
  Activation activation = Activation::LeakyRelu;
  double leaky_slope = kDefaultLeakySlope;
};

/// One multi-head graph attention layer over [F, N, in] (or [N, in]) node
/// features. Per head: e_ij = LeakyReLU(a . [W h_i || W h_j]) over j in N(i),
/// alpha_ij = softmax_j(e_ij), h'_i = sum_j alpha_ij W h_j; heads are
/// concatenated and passed through the activation.
/// When `attention_out` is given it receives alpha in [frame][head][node][neighbor] order.
template <class T>
Tensor<T> gat_layer(const Tensor<T>& x, const FacialGraph& graph, const GatParams<T>& params,
                    const GatOptions& opts, std::vector<T>* attention_out = nullptr);

/// GAT stack followed by a mean over nodes: [F, 68, d] -> [F, embed].
template <class T>
Tensor<T> frame_embed(const Tensor<T>& features, const FacialGraph& graph,
                      const std::vector<GatParams<T>>& layers, const GatOptions& opts);

/// Frame-wise mean of a shot's frame embeddings.
template <class T>
Tensor<T> shot_pool(const std::vector<Tensor<T>>& frame_embeddings);

template <class T>
struct LstmParams {
  Tensor<T> w_input;   // [4H, in], gate order input, forget, cell, output
  Tensor<T> w_hidden;  // [4H, H]
  Tensor<T> bias;      // [4H]

  static LstmParams init(std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t hidden() const { return w_hidden.shape()[1]; }
};

template <class T>
struct GruParams {
  Tensor<T> w_input;      // [3H, in], gate order reset, update, candidate
  Tensor<T> w_hidden;     // [3H, H]
  Tensor<T> bias_input;   // [3H]
  Tensor<T> bias_hidden;  // [3H]

  static GruParams init(std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t hidden() const { return w_hidden.shape()[1]; }
};

/// Hidden states h_1..h_K of an LSTM started from zero state.
template <class T>
std::vector<Tensor<T>> lstm_forward(const std::vector<Tensor<T>>& sequence, const LstmParams<T>& p);

/// All GRU hidden states from a zero initial state:
///   r = s(W_ir x + b_ir + W_hr h + b_hr), z = s(W_iz x + b_iz + W_hz h + b_hz)
///   n = tanh(W_in x + b_in + r * (W_hn h + b_hn)), h' = (1 - z) * n + z * h
template <class T>
std::vector<Tensor<T>> gru_states(const std::vector<Tensor<T>>& sequence, const GruParams<T>& p);

/// Final GRU state (F_land).
template <class T>
Tensor<T> gru_forward(const std::vector<Tensor<T>>& sequence, const GruParams<T>& p);

}  // namespace shotfuse
