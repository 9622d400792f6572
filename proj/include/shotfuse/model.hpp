#pragma once

// The complete dual-branch classifier: landmark branch (GAT -> shot pooling ->
// LSTM -> GRU), visual branch (R3D -> shot pooling), optional auxiliary
// features, fusion and the reduction head.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shotfuse/config.hpp"
#include "shotfuse/data.hpp"
#include "shotfuse/fusion.hpp"
#include "shotfuse/graph_branch.hpp"
#include "shotfuse/visual_branch.hpp"

namespace shotfuse {

enum class Variant { FusedWeighted, FusedConcat, VisualOnly, LandmarksOnly };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  std::string profile = "desk";
  std::size_t dim = 64;         // D: branch embeddings, LSTM/GRU width, head input
  std::size_t gat_hidden = 16;  // width of the first GAT layer
  std::size_t gat_embed = 32;   // width of the last GAT layer (frame embedding)
  std::size_t gat_heads = 2;
  bool velocity = true;
  double velocity_scale = 10.0;
  double attention_slope = 0.2;
  Activation activation = Activation::LeakyRelu;
  double leaky_slope = kDefaultLeakySlope;
  double dropout = 0.5;
  Variant variant = Variant::FusedWeighted;
  FusionMode fusion = FusionMode::Gated;
  bool aux_ear = false;
  bool aux_mar = false;
  bool aux_demographics = false;
  R3DConfig r3d;

  /// desk: D=64, GAT 16/32, R3D widths 8/16. paper: D=512, GAT 64/128,
  /// R3D-18 layout (widths 64/128/256/512, two blocks per stage).
  static ModelConfig for_profile(const std::string& profile);
  std::size_t aux_width() const;
  bool uses_landmarks() const { return variant != Variant::VisualOnly; }
  bool uses_clips() const { return variant != Variant::LandmarksOnly; }

  /// Overrides from key=value entries (keys listed by `keys()`). The
  /// `profile` key is recorded but does not reset other fields; use
  /// `from_key_values` to start from the named profile.
  void apply(const KeyValues& kv);
  static ModelConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
  static std::vector<std::string> keys();
};

/// Prepared tensors for one sample: a shot sequence of raw landmark
/// coordinates [F, 68, 2] and clips [C, T, H, W], plus auxiliary features.
template <class T>
struct ModelInput {
  std::string sample_id;
  int label = kSober;
  std::vector<Tensor<T>> coords;
  std::vector<Tensor<T>> clips;
  std::vector<T> aux;
};

/// EAR and MAR per-shot mean and standard deviation, averaged over shots.
std::pair<double, double> ear_stats(const LandmarkShot& shot);
std::pair<double, double> mar_stats(const LandmarkShot& shot);

template <class T>
ModelInput<T> make_input(const ModelConfig& cfg, const SampleRecord& record, const std::vector<SampleData>& shots,
                         bool coords_require_grad = false);

template <class T>
struct ForwardResult {
  Tensor<T> logits;      // [N, 2]
  Tensor<T> alpha;       // [N], fused_weighted only
  Tensor<T> f_land;      // [N, D]
  Tensor<T> f_vis;       // [N, D]
  Tensor<T> last_stage;  // final R3D stage activation over every clip in the batch
};

template <class T>
class FusionModel {
 public:
  FusionModel() = default;
  FusionModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const FacialGraph& graph() const { return graph_; }

  ForwardResult<T> forward(const std::vector<const ModelInput<T>*>& batch, Mode mode, Rng& rng);

  /// Trainable leaves in a fixed order with stable names.
  std::vector<std::pair<std::string, Tensor<T>>> parameters();
  /// BatchNorm running statistics in a fixed order.
  std::vector<std::pair<std::string, std::vector<T>*>> buffers();

  std::vector<GatParams<T>> gat;
  LstmParams<T> lstm;
  GruParams<T> gru;
  R3DParams<T> r3d;
  std::optional<LinearParams<T>> aux_projection;
  FusionParams<T> fusion;
  HeadParams<T> head;

 private:
  Tensor<T> landmark_branch(const std::vector<const ModelInput<T>*>& batch);
  Tensor<T> visual_branch(const std::vector<const ModelInput<T>*>& batch, Mode mode, Tensor<T>* last_stage);

  ModelConfig cfg_;
  FacialGraph graph_;
};

}  // namespace shotfuse
