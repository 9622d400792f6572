#include "shotfuse/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "shotfuse/ops.hpp"
#include "shotfuse/serialize.hpp"

namespace shotfuse {

namespace {

void check_target(int target_class) {
  if (target_class != kSober && target_class != kIntoxicated)
    throw DomainError("target class " + std::to_string(target_class) + " is out of range [0, 1]");
}

struct RegionDef {
  const char* name;
  const char* indexing;
  std::size_t first, last;
};

std::vector<RegionDef> region_defs() {
  return {
      {"jaw", "anatomical", 0, 16},
      {"right_brow", "anatomical", 17, 21},
      {"left_brow", "anatomical", 22, 26},
      {"nose_bridge", "anatomical", 27, 30},
      {"nose_base", "anatomical", 31, 35},
      {"right_eye", "anatomical", 36, 41},
      {"left_eye", "anatomical", 42, 47},
      {"eyes", "anatomical", 36, 47},
      {"outer_lip", "anatomical", 48, 59},
      {"inner_lip", "anatomical", 60, 67},
      {"mouth", "anatomical", 48, 67},
      {"jawline_points_12_15", "zero_based", 12, 15},
      {"jawline_points_12_15", "one_based", 11, 14},
      {"eyes_points_43_46", "zero_based", 43, 46},
      {"eyes_points_43_46", "one_based", 42, 45},
      {"mouth_corners_points_49_54", "zero_based", 49, 54},
      {"mouth_corners_points_49_54", "one_based", 48, 53},
  };
}

template <class T>
double logit_of(const Tensor<T>& logits, int target_class) {
  return static_cast<double>(logits.data()[static_cast<std::size_t>(target_class)]);
}

/// Gradient of logits[0, target] only.
template <class T>
Tensor<T> target_selector(int target_class) {
  std::vector<T> s(2, T(0));
  s[static_cast<std::size_t>(target_class)] = T(1);
  return Tensor<T>::from({1, 2}, std::move(s));
}

template <class T>
void clear_grads(FusionModel<T>& model) {
  for (auto& [name, p] : model.parameters()) {
    Tensor<T> t = p;
    t.zero_grad();
  }
}

}  // namespace

double SaliencyReport::region(const std::string& name) const {
  for (const auto& r : regions)
    if (r.name == name) return r.mean;
  throw ContractError("unknown saliency region '" + name + "'");
}

template <class T>
SaliencyReport landmark_saliency(FusionModel<T>& model, const ModelInput<T>& input, int target_class) {
  check_target(target_class);
  if (!model.config().uses_landmarks()) throw ConfigError("saliency needs a model with a landmark branch");
  ModelInput<T> in = input;
  for (auto& c : in.coords) {
    c = c.detach();
    c.set_requires_grad(true);
  }
  reset_tape<T>();
  Rng unused(0);
  const ForwardResult<T> r = model.forward({&in}, Mode::Eval, unused);
  const Tensor<T> logits = r.logits;
  SaliencyReport rep;
  rep.sample_id = input.sample_id;
  rep.target_class = target_class;
  rep.target_logit = logit_of(logits, target_class);
  backward(sum(mul(logits, target_selector<T>(target_class))));

  const std::size_t nodes = kLandmarkCount;
  rep.scores.assign(nodes, 0.0);
  std::size_t frames = 0;
  for (const auto& c : in.coords) {
    const std::size_t f = c.shape()[0];
    frames += f;
    if (!c.has_grad()) continue;
    const auto g = c.grad();
    for (std::size_t t = 0; t < f; ++t)
      for (std::size_t n = 0; n < nodes; ++n) {
        const double gx = static_cast<double>(g[(t * nodes + n) * 2]);
        const double gy = static_cast<double>(g[(t * nodes + n) * 2 + 1]);
        rep.scores[n] += std::sqrt(gx * gx + gy * gy);
      }
  }
  reset_tape<T>();
  clear_grads(model);
  for (double& s : rep.scores) s /= static_cast<double>(frames);
  const double peak = *std::max_element(rep.scores.begin(), rep.scores.end());
  if (peak > 0) {
    for (double& s : rep.scores) s /= peak;
  } else {
    rep.all_zero = true;
    std::fill(rep.scores.begin(), rep.scores.end(), 0.0);
  }
  for (const auto& d : region_defs()) {
    RegionScore rs{d.name, d.indexing, d.first, d.last, 0.0};
    for (std::size_t n = d.first; n <= d.last; ++n) rs.mean += rep.scores[n];
    rs.mean /= static_cast<double>(d.last - d.first + 1);
    rep.regions.push_back(rs);
  }
  return rep;
}

std::string saliency_json(const SaliencyReport& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["target_class"] = r.target_class;
  j["target_logit"] = r.target_logit;
  j["all_zero"] = r.all_zero;
  j["scores"] = r.scores;
  auto regions = nlohmann::ordered_json::array();
  for (const auto& g : r.regions)
    regions.push_back(
        {{"name", g.name}, {"indexing", g.indexing}, {"first_node", g.first}, {"last_node", g.last}, {"mean", g.mean}});
  j["regions"] = regions;
  return j.dump(2) + "\n";
}

template <class T>
std::vector<ActivationMap> grad_cam3d(FusionModel<T>& model, const ModelInput<T>& input, int target_class) {
  check_target(target_class);
  if (!model.config().uses_clips()) throw ConfigError("Grad-CAM needs a model with a visual branch");
  reset_tape<T>();
  Rng unused(0);
  const ForwardResult<T> r = model.forward({&input}, Mode::Eval, unused);
  const Tensor<T> logits = r.logits;
  backward(sum(mul(logits, target_selector<T>(target_class))));
  const Tensor<T> stage = r.last_stage;  // [shots, C, T', H', W']
  const Shape& s = stage.shape();
  const std::size_t shots = s[0], channels = s[1], extent = s[2] * s[3] * s[4];
  const std::vector<T> zeros(stage.numel(), T(0));
  const std::span<const T> grad = stage.has_grad() ? stage.grad() : std::span<const T>(zeros);
  const auto act = stage.data();

  std::vector<ActivationMap> maps;
  for (std::size_t k = 0; k < shots; ++k) {
    ActivationMap m;
    m.sample_id = input.sample_id;
    m.target_class = target_class;
    m.shot = k;
    m.cam_shape = {s[2], s[3], s[4]};
    m.cam.assign(extent, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t base = (k * channels + c) * extent;
      double w = 0;
      for (std::size_t i = 0; i < extent; ++i) w += static_cast<double>(grad[base + i]);
      w /= static_cast<double>(extent);
      for (std::size_t i = 0; i < extent; ++i) m.cam[i] += w * static_cast<double>(act[base + i]);
    }
    for (double& v : m.cam) v = std::max(0.0, v);
    const Shape& clip = input.clips[k].shape();  // [C, T, H, W]
    m.upsampled_shape = {clip[1], clip[2], clip[3]};
    m.upsampled = upsample_linear(m.cam, m.cam_shape, m.upsampled_shape);
    maps.push_back(std::move(m));
  }
  reset_tape<T>();
  clear_grads(model);
  return maps;
}

std::vector<double> upsample_linear(const std::vector<double>& values, const Shape& from, const Shape& to) {
  if (from.size() != to.size() || shape_numel(from) != values.size())
    throw DimensionError("upsample_linear: " + std::to_string(values.size()) + " values for shape " + shape_str(from) +
                         " -> " + shape_str(to));
  std::vector<double> cur = values;
  Shape shape = from;
  for (std::size_t axis = 0; axis < from.size(); ++axis) {
    const std::size_t n_in = shape[axis], n_out = to[axis];
    if (n_in == 0 || n_out == 0) throw DimensionError("upsample_linear: empty axis");
    std::size_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
    for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
    std::vector<double> next(outer * n_out * inner);
    const double scale = static_cast<double>(n_in) / static_cast<double>(n_out);
    for (std::size_t j = 0; j < n_out; ++j) {
      const double pos = std::clamp((static_cast<double>(j) + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(pos));
      const std::size_t i1 = std::min(i0 + 1, n_in - 1);
      const double f = pos - static_cast<double>(i0);
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < inner; ++i)
          next[(o * n_out + j) * inner + i] =
              (1 - f) * cur[(o * n_in + i0) * inner + i] + f * cur[(o * n_in + i1) * inner + i];
    }
    cur = std::move(next);
    shape[axis] = n_out;
  }
  return cur;
}

std::string pgm_image(std::span<const double> plane, std::size_t h, std::size_t w, double peak) {
  if (plane.size() != h * w) throw DimensionError("pgm_image: plane size does not match " + std::to_string(h) + "x" +
                                                  std::to_string(w));
  std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  for (double v : plane) {
    const double scaled = peak > 0 ? std::clamp(v / peak, 0.0, 1.0) * 255.0 : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
  }
  return out;
}

std::filesystem::path write_cam_files(const std::filesystem::path& dir, const std::vector<ActivationMap>& maps) {
  nlohmann::ordered_json index;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& m : maps) {
    const std::size_t tp = m.cam_shape[0], hp = m.cam_shape[1], wp = m.cam_shape[2];
    const std::size_t h = m.upsampled_shape[1], w = m.upsampled_shape[2];
    const double peak = m.cam.empty() ? 0.0 : *std::max_element(m.cam.begin(), m.cam.end());
    auto files = nlohmann::ordered_json::array();
    for (std::size_t t = 0; t < tp; ++t) {
      const std::vector<double> slice(m.cam.begin() + static_cast<std::ptrdiff_t>(t * hp * wp),
                                      m.cam.begin() + static_cast<std::ptrdiff_t>((t + 1) * hp * wp));
      const std::vector<double> up = upsample_linear(slice, {hp, wp}, {h, w});
      char name[64];
      std::snprintf(name, sizeof name, "cam_shot%zu_t%02zu.pgm", m.shot, t);
      write_text_file(dir / name, pgm_image(up, h, w, peak));
      files.push_back(name);
    }
    nlohmann::ordered_json e;
    e["sample_id"] = m.sample_id;
    e["target_class"] = m.target_class;
    e["shot"] = m.shot;
    e["cam_shape"] = m.cam_shape;
    e["upsampled_shape"] = m.upsampled_shape;
    e["peak"] = peak;
    e["cam"] = m.cam;
    e["frames"] = files;
    entries.push_back(e);
  }
  index["maps"] = entries;
  const auto path = dir / "cam_index.json";
  write_text_file(path, index.dump(2) + "\n");
  return path;
}

template SaliencyReport landmark_saliency<float>(FusionModel<float>&, const ModelInput<float>&, int);
template SaliencyReport landmark_saliency<double>(FusionModel<double>&, const ModelInput<double>&, int);
template std::vector<ActivationMap> grad_cam3d<float>(FusionModel<float>&, const ModelInput<float>&, int);
template std::vector<ActivationMap> grad_cam3d<double>(FusionModel<double>&, const ModelInput<double>&, int);

}  // namespace shotfuse
