#include "shotfuse/data.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>

namespace shotfuse {

std::string label_name(int label) {
  if (label == kSober) return "sober";
  if (label == kIntoxicated) return "intoxicated";
  throw ContractError("unknown class label " + std::to_string(label));
}

namespace {

std::string range_text(const Range& r) { return format_double(r.first) + "," + format_double(r.second); }

const char* demographics_name(DemographicsMode m) {
  switch (m) {
    case DemographicsMode::None: return "none";
    case DemographicsMode::Noise: return "noise";
    case DemographicsMode::Informative: return "informative";
  }
  return "noise";
}

std::size_t positive_count(const std::string& key, const std::string& value) {
  const std::int64_t v = parse_int(key, value);
  if (v <= 0) throw ConfigError(key + ": must be positive, got " + value);
  return static_cast<std::size_t>(v);
}

}  // namespace

std::vector<std::string> GeneratorConfig::keys() {
  return {"subjects_per_class", "shots_per_subject", "frames_per_shot", "fps", "clip_frames", "clip_height",
          "clip_width", "render_size", "blink_interval", "sober_blink_duration", "intoxicated_blink_duration",
          "sober_sway", "intoxicated_sway", "sober_jitter", "intoxicated_jitter", "blink_depth",
          "detector_noise", "face_scale_px", "train_fraction", "demographics"};
}

GeneratorConfig GeneratorConfig::from_key_values(const KeyValues& kv) {
  kv.require_known(keys());
  GeneratorConfig c;
  for (const auto& [k, v] : kv.entries) {
    if (k == "subjects_per_class") c.subjects_per_class = positive_count(k, v);
    else if (k == "shots_per_subject") c.shots_per_subject = positive_count(k, v);
    else if (k == "frames_per_shot") c.frames_per_shot = positive_count(k, v);
    else if (k == "fps") c.fps = parse_double(k, v);
    else if (k == "clip_frames") c.clip_frames = positive_count(k, v);
    else if (k == "clip_height") c.clip_height = positive_count(k, v);
    else if (k == "clip_width") c.clip_width = positive_count(k, v);
    else if (k == "render_size") c.render_size = positive_count(k, v);
    else if (k == "blink_interval") c.blink_interval = parse_range(k, v);
    else if (k == "sober_blink_duration") c.sober_blink_duration = parse_range(k, v);
    else if (k == "intoxicated_blink_duration") c.intoxicated_blink_duration = parse_range(k, v);
    else if (k == "sober_sway") c.sober_sway = parse_range(k, v);
    else if (k == "intoxicated_sway") c.intoxicated_sway = parse_range(k, v);
    else if (k == "sober_jitter") c.sober_jitter = parse_range(k, v);
    else if (k == "intoxicated_jitter") c.intoxicated_jitter = parse_range(k, v);
    else if (k == "blink_depth") c.blink_depth = parse_double(k, v);
    else if (k == "detector_noise") c.detector_noise = parse_double(k, v);
    else if (k == "face_scale_px") c.face_scale_px = parse_range(k, v);
    else if (k == "train_fraction") c.train_fraction = parse_double(k, v);
    else if (k == "demographics") {
      if (v == "none") c.demographics = DemographicsMode::None;
      else if (v == "noise") c.demographics = DemographicsMode::Noise;
      else if (v == "informative") c.demographics = DemographicsMode::Informative;
      else throw ConfigError("demographics: expected none, noise or informative, got '" + v + "'");
    }
  }
  c.validate();
  return c;
}

KeyValues GeneratorConfig::to_key_values() const {
  KeyValues kv;
  kv.source = "generator";
  kv.set("subjects_per_class", std::to_string(subjects_per_class));
  kv.set("shots_per_subject", std::to_string(shots_per_subject));
  kv.set("frames_per_shot", std::to_string(frames_per_shot));
  kv.set("fps", format_double(fps));
  kv.set("clip_frames", std::to_string(clip_frames));
  kv.set("clip_height", std::to_string(clip_height));
  kv.set("clip_width", std::to_string(clip_width));
  kv.set("render_size", std::to_string(render_size));
  kv.set("blink_interval", range_text(blink_interval));
  kv.set("sober_blink_duration", range_text(sober_blink_duration));
  kv.set("intoxicated_blink_duration", range_text(intoxicated_blink_duration));
  kv.set("sober_sway", range_text(sober_sway));
  kv.set("intoxicated_sway", range_text(intoxicated_sway));
  kv.set("sober_jitter", range_text(sober_jitter));
  kv.set("intoxicated_jitter", range_text(intoxicated_jitter));
  kv.set("blink_depth", format_double(blink_depth));
  kv.set("detector_noise", format_double(detector_noise));
  kv.set("face_scale_px", range_text(face_scale_px));
  kv.set("train_fraction", format_double(train_fraction));
  kv.set("demographics", demographics_name(demographics));
  return kv;
}

void GeneratorConfig::validate() const {
  auto nonnegative = [](const char* key, const Range& r) {
    if (r.first < 0 || r.second < r.first) throw ConfigError(std::string(key) + ": invalid range");
  };
  if (subjects_per_class < 2) throw ConfigError("subjects_per_class: at least 2 needed for a subject split");
  if (shots_per_subject == 0 || frames_per_shot == 0 || clip_frames == 0 || clip_height == 0 || clip_width == 0 ||
      render_size < 8)
    throw ConfigError("generator extents must be positive (render_size >= 8)");
  if (!(fps > 0)) throw ConfigError("fps: must be positive");
  nonnegative("blink_interval", blink_interval);
  nonnegative("sober_blink_duration", sober_blink_duration);
  nonnegative("intoxicated_blink_duration", intoxicated_blink_duration);
  nonnegative("sober_sway", sober_sway);
  nonnegative("intoxicated_sway", intoxicated_sway);
  nonnegative("sober_jitter", sober_jitter);
  nonnegative("intoxicated_jitter", intoxicated_jitter);
  if (!(blink_interval.first > 0)) throw ConfigError("blink_interval: must be positive");
  if (!(blink_depth >= 0 && blink_depth < 1)) throw ConfigError("blink_depth: must lie in [0, 1)");
  if (detector_noise < 0) throw ConfigError("detector_noise: must be nonnegative");
  if (!(face_scale_px.first > 0) || face_scale_px.second < face_scale_px.first)
    throw ConfigError("face_scale_px: invalid range");
  if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train_fraction: must lie in (0, 1)");
}

LandmarkFrame neutral_face() {
  LandmarkFrame f;
  auto& c = f.coords;
  const double pi = std::numbers::pi;
  for (std::size_t i = 0; i <= 16; ++i) {  // jaw, from the subject's right ear round the chin
    const double t = pi * static_cast<double>(i) / 16.0;
    c[i] = {-std::cos(t), -0.3 + 1.15 * std::sin(t)};
  }
  for (std::size_t i = 0; i < 5; ++i) {  // brows
    const double u = static_cast<double>(i) / 4.0;
    c[17 + i] = {-0.85 + 0.65 * u, -0.55 - 0.08 * std::sin(pi * u)};
    c[22 + i] = {0.2 + 0.65 * u, -0.55 - 0.08 * std::sin(pi * u)};
  }
  for (std::size_t i = 0; i < 4; ++i) c[27 + i] = {0.0, -0.35 + 0.14 * static_cast<double>(i)};  // bridge
  for (std::size_t i = 0; i < 5; ++i)  // nose base
    c[31 + i] = {-0.2 + 0.1 * static_cast<double>(i), 0.17 + (i == 2 ? 0.03 : 0.0)};
  const Point2 eye_shape[6] = {{-0.22, 0.0}, {-0.07, -0.07}, {0.07, -0.07}, {0.22, 0.0}, {0.07, 0.07}, {-0.07, 0.07}};
  for (std::size_t i = 0; i < 6; ++i) {
    c[36 + i] = {-0.5 + eye_shape[i].x, -0.3 + eye_shape[i].y};
    c[42 + i] = {0.5 + eye_shape[i].x, -0.3 + eye_shape[i].y};
  }
  for (std::size_t i = 0; i < 12; ++i) {  // outer lip, corner 48 then along the top to 54
    const double t = pi * static_cast<double>(i) / 6.0;
    c[48 + i] = {-0.42 * std::cos(t), 0.5 - (i <= 6 ? 0.12 : 0.16) * std::sin(t)};
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const double t = pi * static_cast<double>(i) / 4.0;
    c[60 + i] = {-0.3 * std::cos(t), 0.5 - 0.05 * std::sin(t)};
  }
  return f;
}

SubjectLatents draw_latents(const GeneratorConfig& cfg, int label, Rng& rng) {
  SubjectLatents s;
  s.label = label;
  const bool drunk = label == kIntoxicated;
  auto draw = [&rng](const Range& r) { return rng.uniform(r.first, r.second); };
  s.blink_interval = draw(cfg.blink_interval);
  s.blink_duration = draw(drunk ? cfg.intoxicated_blink_duration : cfg.sober_blink_duration);
  s.sway = draw(drunk ? cfg.intoxicated_sway : cfg.sober_sway);
  s.jitter = draw(drunk ? cfg.intoxicated_jitter : cfg.sober_jitter);
  s.face_scale_px = draw(cfg.face_scale_px);
  s.face_center = {320.0 + rng.uniform(-40.0, 40.0), 240.0 + rng.uniform(-40.0, 40.0)};
  for (auto& p : s.identity) p = {rng.normal(0.0, 0.02), rng.normal(0.0, 0.02)};
  return s;
}

namespace {

/// Pulls the eyelid points of one eye toward the line through its corners.
void close_eye(LandmarkFrame& f, std::size_t first, double openness) {
  const double corner_y = 0.5 * (f.coords[first].y + f.coords[first + 3].y);
  for (std::size_t k : {first + 1, first + 2, first + 4, first + 5})
    f.coords[k].y = corner_y + (f.coords[k].y - corner_y) * openness;
}

}  // namespace

SynthShot simulate_shot(const GeneratorConfig& cfg, const SubjectLatents& subject, Rng& rng,
                        const std::string& shot_id) {
  const double pi = std::numbers::pi;
  const std::size_t n = cfg.frames_per_shot;
  const double duration = static_cast<double>(n) / cfg.fps;

  std::vector<double> onsets;
  for (double t = rng.uniform(-subject.blink_duration, subject.blink_interval); t < duration;
       t += subject.blink_interval * rng.uniform(0.8, 1.2))
    onsets.push_back(t);

  const double f_rot = rng.uniform(0.3, 0.9), f_x = rng.uniform(0.3, 0.9), f_y = rng.uniform(0.3, 0.9);
  const double p_rot = rng.uniform(0.0, 2 * pi), p_x = rng.uniform(0.0, 2 * pi), p_y = rng.uniform(0.0, 2 * pi);

  LandmarkFrame base = neutral_face();
  for (std::size_t k = 0; k < kLandmarkCount; ++k) {
    base.coords[k].x += subject.identity[k].x;
    base.coords[k].y += subject.identity[k].y;
  }

  SynthShot shot;
  shot.landmarks.shot_id = shot_id;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / cfg.fps;
    double open = 1.0;
    for (double on : onsets)
      if (t >= on && t <= on + subject.blink_duration)
        open = std::min(open, 1.0 - cfg.blink_depth * std::sin(pi * (t - on) / subject.blink_duration));
    shot.openness.push_back(open);

    LandmarkFrame f = base;
    close_eye(f, 36, open);
    close_eye(f, 42, open);
    for (std::size_t k = 48; k < kLandmarkCount; ++k) {
      f.coords[k].x += rng.normal(0.0, subject.jitter);
      f.coords[k].y += rng.normal(0.0, subject.jitter);
    }
    const double angle = subject.sway * std::sin(2 * pi * f_rot * t + p_rot);
    const double tx = subject.sway * std::sin(2 * pi * f_x * t + p_x);
    const double ty = 0.7 * subject.sway * std::sin(2 * pi * f_y * t + p_y);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (auto& p : f.coords) {
      const double x = ca * p.x - sa * p.y + tx + rng.normal(0.0, cfg.detector_noise);
      const double y = sa * p.x + ca * p.y + ty + rng.normal(0.0, cfg.detector_noise);
      p = {subject.face_center.x + subject.face_scale_px * x, subject.face_center.y + subject.face_scale_px * y};
    }
    shot.landmarks.frames.push_back(f);
  }
  shot.clip = render_clip(cfg, shot.landmarks, subject.face_scale_px);
  shot.clip.shot_id = shot_id;
  return shot;
}

Clip render_clip(const GeneratorConfig& cfg, const LandmarkShot& shot, double face_scale_px) {
  if (shot.frames.empty()) throw ContractError("render_clip: shot '" + shot.shot_id + "' has no frames");
  double cx = 0, cy = 0;
  for (const auto& f : shot.frames)
    for (const auto& p : f.coords) {
      cx += p.x;
      cy += p.y;
    }
  const double count = static_cast<double>(shot.frames.size() * kLandmarkCount);
  cx /= count;
  cy /= count;
  const std::size_t r = cfg.render_size;
  const double crop = 3.2 * face_scale_px;
  const double px_per_unit = static_cast<double>(r) / crop;
  const double sigma = static_cast<double>(r) / 48.0;
  const int reach = static_cast<int>(std::ceil(3 * sigma));

  Clip raw;
  raw.channels = 3;
  raw.frames = shot.frames.size();
  raw.height = r;
  raw.width = r;
  raw.shot_id = shot.shot_id;
  raw.voxels.assign(raw.size(), 0.0f);
  for (std::size_t t = 0; t < raw.frames; ++t)
    for (std::size_t k = 0; k < kLandmarkCount; ++k) {
      const std::size_t channel = k < 36 ? 0 : (k < 48 ? 1 : 2);
      const double u = (shot.frames[t].coords[k].x - cx) * px_per_unit + 0.5 * static_cast<double>(r);
      const double v = (shot.frames[t].coords[k].y - cy) * px_per_unit + 0.5 * static_cast<double>(r);
      const int u0 = static_cast<int>(std::floor(u)), v0 = static_cast<int>(std::floor(v));
      float* plane = raw.voxels.data() + (channel * raw.frames + t) * r * r;
      for (int y = std::max(0, v0 - reach); y <= std::min(static_cast<int>(r) - 1, v0 + reach); ++y)
        for (int x = std::max(0, u0 - reach); x <= std::min(static_cast<int>(r) - 1, u0 + reach); ++x) {
          const double dx = x + 0.5 - u, dy = y + 0.5 - v;
          const auto value = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
          float& cell = plane[static_cast<std::size_t>(y) * r + static_cast<std::size_t>(x)];
          cell = std::max(cell, value);
        }
    }
  return resample_clip(raw, cfg.clip_frames, cfg.clip_height, cfg.clip_width);
}

namespace {

std::string subject_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%03zu", index);
  return buf;
}

}  // namespace

DatasetManifest generate_dataset(const GeneratorConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& out_dir, std::size_t jobs) {
  cfg.validate();
  const std::size_t subjects = 2 * cfg.subjects_per_class;
  std::vector<std::vector<SampleRecord>> per_subject(subjects);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < subjects && !failed; i = next++) {
      try {
        const int label = i < cfg.subjects_per_class ? kSober : kIntoxicated;
        const std::string sid = subject_name(i);
        Rng rng(mix_seed(seed, i));
        const SubjectLatents latents = draw_latents(cfg, label, rng);
        for (std::size_t k = 0; k < cfg.shots_per_subject; ++k) {
          SampleRecord rec;
          rec.sample_id = sid + "_k" + std::to_string(k);
          rec.subject_id = sid;
          rec.label = label;
          rec.landmark_path = "landmarks/" + rec.sample_id + ".lmk";
          rec.clip_path = "clips/" + rec.sample_id + ".clp";
          const SynthShot shot = simulate_shot(cfg, latents, rng, rec.sample_id);
          save_landmarks(out_dir / rec.landmark_path, shot.landmarks);
          save_clip(out_dir / rec.clip_path, shot.clip);
          per_subject[i].push_back(std::move(rec));
        }
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, subjects));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  DatasetManifest m;
  m.root = out_dir;
  m.seed = seed;
  m.generator_config = cfg.to_key_values().to_text();
  for (auto& recs : per_subject)
    for (auto& r : recs) m.records.push_back(std::move(r));
  std::sort(m.records.begin(), m.records.end(),
            [](const SampleRecord& a, const SampleRecord& b) { return a.sample_id < b.sample_id; });
  m = subject_split(std::move(m), cfg.train_fraction, seed);
  if (cfg.demographics != DemographicsMode::None) m = attach_demographics(std::move(m), seed, cfg.demographics);
  save_manifest(m);
  return m;
}

DatasetManifest subject_split(DatasetManifest m, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1))
    throw ContractError("subject_split: train fraction must lie in (0, 1)");
  std::vector<std::string> train;
  for (int label : {kSober, kIntoxicated}) {
    std::vector<std::string> ids = m.subjects(label);
    if (ids.size() < 2)
      throw ContractError("subject_split: class " + label_name(label) + " has fewer than 2 subjects");
    Rng rng(mix_seed(seed, 0x5911700ULL + static_cast<std::uint64_t>(label)));
    rng.shuffle(ids);
    const auto n = static_cast<double>(ids.size());
    const auto take = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(train_fraction * n)), 1,
                                              ids.size() - 1);
    train.insert(train.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  }
  for (auto& r : m.records)
    r.split = std::find(train.begin(), train.end(), r.subject_id) != train.end() ? "train" : "test";
  return m;
}

DatasetManifest attach_demographics(DatasetManifest m, std::uint64_t seed, DemographicsMode mode) {
  if (mode == DemographicsMode::None) {
    for (auto& r : m.records) r.demo_vector.reset();
    return m;
  }
  std::vector<std::string> ids;
  for (const auto& r : m.records) ids.push_back(r.subject_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  std::vector<std::vector<double>> vectors;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Rng rng(mix_seed(seed, 0xD3E0000ULL + i));
    std::vector<double> v(kDemographicsWidth, 0.0);
    const auto age = rng.below(2), gender = rng.below(2), race = rng.below(6);
    int label = kSober;
    for (const auto& r : m.records)
      if (r.subject_id == ids[i]) label = r.label;
    v[mode == DemographicsMode::Informative ? static_cast<std::size_t>(label) : age] = 1.0;
    v[2 + gender] = 1.0;
    v[4 + race] = 1.0;
    vectors.push_back(std::move(v));
  }
  for (auto& r : m.records) {
    const auto it = std::lower_bound(ids.begin(), ids.end(), r.subject_id);
    r.demo_vector = vectors[static_cast<std::size_t>(it - ids.begin())];
  }
  return m;
}

std::vector<std::size_t> detect_shot_boundaries(const Clip& video, double threshold) {
  if (video.voxels.size() != video.size()) throw ContractError("detect_shot_boundaries: inconsistent clip");
  std::vector<std::size_t> cuts;
  const std::size_t plane = video.height * video.width;
  for (std::size_t t = 1; t < video.frames; ++t) {
    double diff = 0;
    for (std::size_t c = 0; c < video.channels; ++c) {
      const float* a = video.voxels.data() + (c * video.frames + t - 1) * plane;
      const float* b = a + plane;
      for (std::size_t i = 0; i < plane; ++i) diff += std::abs(static_cast<double>(b[i]) - a[i]);
    }
    if (diff / static_cast<double>(plane * video.channels) > threshold) cuts.push_back(t);
  }
  return cuts;
}

}  // namespace shotfuse
