#pragma once

// Gradient-based explanations: landmark saliency on raw input coordinates and
// Grad-CAM over the last 3D-convolution stage.

#include <filesystem>
#include <string>
#include <vector>

#include "shotfuse/model.hpp"

namespace shotfuse {

struct RegionScore {
  std::string name;
  /// "anatomical" groups use 0-based node ids; the table ranges are reported
  /// once read as 0-based and once as 1-based point numbers.
  std::string indexing;
  std::size_t first = 0, last = 0;  // inclusive 0-based node ids
  double mean = 0;
};

struct SaliencyReport {
  std::string sample_id;
  int target_class = 0;
  double target_logit = 0;
  std::vector<double> scores;  // one per node, max 1 unless all_zero
  bool all_zero = false;
  std::vector<RegionScore> regions;

  /// Mean score of the named region; throws ContractError for unknown names.
  double region(const std::string& name) const;
};

/// Gradient of the raw target logit with respect to the input landmark
/// coordinates. Per node: L2 norm of the (x, y) gradient averaged over every
/// frame of every shot, divided by the largest node score. Runs in eval mode;
/// parameter values and BN statistics are untouched.
template <class T>
SaliencyReport landmark_saliency(FusionModel<T>& model, const ModelInput<T>& input, int target_class);

std::string saliency_json(const SaliencyReport& r);

struct ActivationMap {
  std::string sample_id;
  int target_class = 0;
  std::size_t shot = 0;
  Shape cam_shape;  // [T', H', W'] of the last stage
  std::vector<double> cam;
  Shape upsampled_shape;  // [T, H, W] of the input clip
  std::vector<double> upsampled;
};

/// Grad-CAM per shot: channel weights are the mean target-logit gradient over
/// the last stage's extent; the map is the rectified weighted channel sum,
/// then linearly upsampled to the clip resolution.
template <class T>
std::vector<ActivationMap> grad_cam3d(FusionModel<T>& model, const ModelInput<T>& input, int target_class);

/// Separable linear interpolation with half-pixel centers and edge clamping.
std::vector<double> upsample_linear(const std::vector<double>& values, const Shape& from, const Shape& to);

/// Binary 8-bit PGM of an h x w plane scaled so that `peak` maps to 255.
std::string pgm_image(std::span<const double> plane, std::size_t h, std::size_t w, double peak);

/// Writes one PGM per last-stage frame (spatially upsampled to the clip size)
/// for every map plus an index JSON; returns the index path.
std::filesystem::path write_cam_files(const std::filesystem::path& dir, const std::vector<ActivationMap>& maps);

}  // namespace shotfuse
