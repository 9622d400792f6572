#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "shotfuse/interpret.hpp"
#include "shotfuse/serialize.hpp"
#include "shotfuse/train.hpp"

using namespace shotfuse;
namespace fs = std::filesystem;

namespace {

ModelInput<double> sample_input(const ModelConfig& mc, std::size_t frames, int label = kIntoxicated) {
  GeneratorConfig g;
  g.frames_per_shot = frames;
  Rng rng(31);
  const SubjectLatents subject = draw_latents(g, label, rng);
  const SynthShot shot = simulate_shot(g, subject, rng, "x_k0");
  SampleRecord rec;
  rec.sample_id = "x_k0";
  rec.label = label;
  return make_input<double>(mc, rec, {SampleData{shot.landmarks, shot.clip}});
}

struct Snapshot {
  std::vector<std::vector<double>> params, buffers;
};

Snapshot snapshot(FusionModel<double>& model) {
  Snapshot s;
  for (const auto& [name, p] : model.parameters()) s.params.emplace_back(p.data().begin(), p.data().end());
  for (const auto& [name, b] : model.buffers()) s.buffers.push_back(*b);
  return s;
}

bool same(const Snapshot& a, const Snapshot& b) { return a.params == b.params && a.buffers == b.buffers; }

double target_logit(FusionModel<double>& model, const ModelInput<double>& in, int target) {
  NoGradGuard guard;
  Rng rng(0);
  reset_tape<double>();
  const Tensor<double> logits = model.forward({&in}, Mode::Eval, rng).logits;
  return logits.data()[static_cast<std::size_t>(target)];
}

}  // namespace

TEST_CASE("saliency scores are normalized and parameters untouched") {
  const ModelConfig mc = ModelConfig::for_profile("desk");
  FusionModel<double> model(mc, 4);
  const ModelInput<double> in = sample_input(mc, 6);
  const Snapshot before = snapshot(model);
  const SaliencyReport r = landmark_saliency(model, in, kIntoxicated);
  CHECK(same(before, snapshot(model)));
  REQUIRE(r.scores.size() == kLandmarkCount);
  CHECK_FALSE(r.all_zero);
  CHECK(*std::max_element(r.scores.begin(), r.scores.end()) == 1.0);
  for (double s : r.scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  CHECK(r.target_logit == doctest::Approx(target_logit(model, in, kIntoxicated)).epsilon(1e-12));
  for (const char* name : {"jaw", "eyes", "nose_bridge", "mouth"}) CHECK_NOTHROW(r.region(name));
  std::size_t zero_based = 0, one_based = 0;
  for (const auto& g : r.regions) {
    zero_based += g.indexing == "zero_based";
    one_based += g.indexing == "one_based";
  }
  CHECK(zero_based == 3);
  CHECK(one_based == 3);
  CHECK_THROWS_AS(r.region("forehead"), ContractError);
  const std::string json = saliency_json(r);
  CHECK(json.find("\"all_zero\": false") != std::string::npos);
  CHECK(json.find("\"one_based\"") != std::string::npos);
}

TEST_CASE("saliency scores match finite differences of the target logit") {
  const ModelConfig mc = ModelConfig::for_profile("desk");
  FusionModel<double> model(mc, 9);
  const ModelInput<double> in = sample_input(mc, 3);
  const SaliencyReport r = landmark_saliency(model, in, kSober);
  const std::size_t frames = in.coords[0].shape()[0];
  const double h = 1e-5;
  auto node_score = [&](std::size_t node) {
    double total = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      double g[2];
      for (std::size_t axis = 0; axis < 2; ++axis) {
        const std::size_t idx = (t * kLandmarkCount + node) * 2 + axis;
        ModelInput<double> plus = in, minus = in;
        plus.coords[0] = in.coords[0].detach();
        minus.coords[0] = in.coords[0].detach();
        plus.coords[0].mutable_data()[idx] += h;
        minus.coords[0].mutable_data()[idx] -= h;
        g[axis] = (target_logit(model, plus, kSober) - target_logit(model, minus, kSober)) / (2 * h);
      }
      total += std::hypot(g[0], g[1]);
    }
    return total / static_cast<double>(frames);
  };
  const std::size_t top = static_cast<std::size_t>(std::max_element(r.scores.begin(), r.scores.end()) - r.scores.begin());
  const double peak = node_score(top);
  for (std::size_t node : {std::size_t{3}, std::size_t{38}, std::size_t{62}}) {
    const double expected = node_score(node) / peak;
    CHECK(std::abs(r.scores[node] - expected) < 1e-6);
  }
}

TEST_CASE("saliency of a model with a dead landmark branch is flagged all-zero") {
  const ModelConfig mc = ModelConfig::for_profile("desk");
  FusionModel<double> model(mc, 4);
  for (auto& g : model.gat)
    for (auto& w : g.weight.mutable_data()) w = 0.0;
  const SaliencyReport r = landmark_saliency(model, sample_input(mc, 4), kSober);
  CHECK(r.all_zero);
  for (double s : r.scores) CHECK(s == 0.0);
  CHECK(saliency_json(r).find("\"all_zero\": true") != std::string::npos);
}

TEST_CASE("explanations reject bad targets and missing branches") {
  const ModelConfig mc = ModelConfig::for_profile("desk");
  FusionModel<double> model(mc, 4);
  const ModelInput<double> in = sample_input(mc, 4);
  CHECK_THROWS_AS(landmark_saliency(model, in, 2), DomainError);
  CHECK_THROWS_AS(grad_cam3d(model, in, -1), DomainError);
  const ModelConfig visual = variant_config(mc, "visual_only");
  FusionModel<double> vm(visual, 4);
  CHECK_THROWS_AS(landmark_saliency(vm, sample_input(visual, 4), 0), ConfigError);
  const ModelConfig land = variant_config(mc, "landmarks_only");
  FusionModel<double> lm(land, 4);
  CHECK_THROWS_AS(grad_cam3d(lm, sample_input(land, 4), 0), ConfigError);
}

TEST_CASE("grad-cam maps are nonnegative with the last-stage shape") {
  const ModelConfig mc = ModelConfig::for_profile("desk");
  FusionModel<double> model(mc, 6);
  const ModelInput<double> in = sample_input(mc, 12);
  const Snapshot before = snapshot(model);
  const auto maps = grad_cam3d(model, in, kIntoxicated);
  CHECK(same(before, snapshot(model)));
  REQUIRE(maps.size() == 1);
  const ActivationMap& m = maps[0];
  CHECK(m.cam_shape == Shape{4, 8, 8});
  CHECK(m.upsampled_shape == Shape{8, 32, 32});
  CHECK(m.upsampled.size() == 8 * 32 * 32);
  double peak = 0;
  for (double v : m.cam) {
    CHECK(v >= 0.0);
    CHECK(std::isfinite(v));
    peak = std::max(peak, v);
  }
  CHECK(peak > 0.0);
  for (double v : m.upsampled) CHECK(v >= 0.0);
}

TEST_CASE("grad-cam ignores the other class's logit bias") {
  const ModelConfig mc = ModelConfig::for_profile("desk");
  FusionModel<double> model(mc, 6);
  const ModelInput<double> in = sample_input(mc, 12);
  const auto base = grad_cam3d(model, in, kSober);
  model.head.out.bias.mutable_data()[kIntoxicated] += 3.0;
  const auto shifted = grad_cam3d(model, in, kSober);
  CHECK(base[0].cam == shifted[0].cam);
}

TEST_CASE("grad-cam of a uniform clip is uniform away from padding") {
  // Clip [3, 16, 64, 64]: the last stage is [8, 16, 16]; voxels t in [3, 4]
  // and y, x in [4, 12] have receptive fields that never touch padding.
  const ModelConfig mc = variant_config(ModelConfig::for_profile("desk"), "visual_only");
  for (std::uint64_t seed : {1, 2, 3}) {
    FusionModel<double> model(mc, seed);
    ModelInput<double> in;
    in.sample_id = "uniform";
    in.clips.push_back(Tensor<double>::full({3, 16, 64, 64}, 0.5));
    for (int target : {kSober, kIntoxicated}) {
      const ActivationMap m = grad_cam3d(model, in, target)[0];
      REQUIRE(m.cam_shape == Shape{8, 16, 16});
      double lo = INFINITY, hi = 0;
      for (std::size_t t = 3; t <= 4; ++t)
        for (std::size_t y = 4; y <= 12; ++y)
          for (std::size_t x = 4; x <= 12; ++x) {
            const double v = m.cam[(t * 16 + y) * 16 + x];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
          }
      CHECK(hi - lo <= 1e-9 * std::max(hi, 1e-300));
    }
  }
}

TEST_CASE("linear upsampling") {
  CHECK(upsample_linear({0.0, 1.0}, {2}, {4}) == std::vector<double>{0.0, 0.25, 0.75, 1.0});
  const std::vector<double> v{1, 2, 3, 4, 5, 6};
  CHECK(upsample_linear(v, {2, 3}, {2, 3}) == v);
  for (double x : upsample_linear(std::vector<double>(8, 2.5), {2, 2, 2}, {4, 6, 5})) CHECK(x == 2.5);
  CHECK_THROWS_AS(upsample_linear(v, {2, 2}, {4, 4}), DimensionError);
}

TEST_CASE("pgm export and index") {
  const std::vector<double> plane{0.0, 0.5, 1.0, 2.0};
  const std::string pgm = pgm_image(plane, 2, 2, 1.0);
  const std::string header = "P5\n2 2\n255\n";
  REQUIRE(pgm.size() == header.size() + 4);
  CHECK(pgm.substr(0, header.size()) == header);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 1]) == 128);
  CHECK(static_cast<unsigned char>(pgm[header.size() + 3]) == 255);

  const ModelConfig mc = ModelConfig::for_profile("desk");
  FusionModel<double> model(mc, 6);
  const auto maps = grad_cam3d(model, sample_input(mc, 12), kSober);
  const fs::path dir = fs::temp_directory_path() / "shotfuse_test_cam";
  fs::remove_all(dir);
  const fs::path index = write_cam_files(dir, maps);
  CHECK(fs::exists(index));
  for (std::size_t t = 0; t < 4; ++t) {
    char name[32];
    std::snprintf(name, sizeof name, "cam_shot0_t%02zu.pgm", t);
    REQUIRE(fs::exists(dir / name));
    CHECK(fs::file_size(dir / name) == std::string("P5\n32 32\n255\n").size() + 32 * 32);
  }
  CHECK(read_text_file(index).find("\"cam_shape\"") != std::string::npos);
}
