#include <algorithm>

#include "json.hpp"

#include "shotfuse/data.hpp"
#include "shotfuse/serialize.hpp"

namespace shotfuse {

namespace {

constexpr const char* kLandmarkMagic = "LMK1";
constexpr const char* kClipMagic = "CLP1";

}  // namespace

std::vector<std::uint8_t> encode_landmarks(const LandmarkShot& shot) {
  ByteWriter w;
  w.put_bytes(kLandmarkMagic, 4);
  w.put_u32(static_cast<std::uint32_t>(shot.frames.size()));
  for (const auto& f : shot.frames)
    for (const auto& p : f.coords) {
      w.put_f32(static_cast<float>(p.x));
      w.put_f32(static_cast<float>(p.y));
    }
  return w.finish();
}

LandmarkShot decode_landmarks(std::span<const std::uint8_t> bytes, const std::string& what) {
  ByteReader header(bytes, what);
  header.expect_magic(kLandmarkMagic);
  const std::uint64_t frames = header.get_u32();
  const std::uint64_t expected = 8 + frames * kLandmarkCount * 2 * 4 + 4;
  if (bytes.size() < expected)
    throw TruncationError(what + ": header declares " + std::to_string(frames) + " frames (" +
                          std::to_string(expected) + " bytes), file has " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw FormatError(what + ": " + std::to_string(bytes.size() - expected) + " bytes beyond the declared " +
                      std::to_string(frames) + " frames");
  ByteReader r(checked_content(bytes, what), what);
  r.expect_magic(kLandmarkMagic);
  r.get_u32();
  LandmarkShot shot;
  shot.frames.resize(frames);
  for (auto& f : shot.frames)
    for (auto& p : f.coords) {
      p.x = r.get_f32();
      p.y = r.get_f32();
    }
  return shot;
}

std::vector<std::uint8_t> encode_clip(const Clip& clip) {
  if (clip.voxels.size() != clip.size()) throw ContractError("encode_clip: voxel count does not match extents");
  ByteWriter w;
  w.put_bytes(kClipMagic, 4);
  for (std::size_t e : {clip.channels, clip.frames, clip.height, clip.width}) w.put_u32(static_cast<std::uint32_t>(e));
  for (float v : clip.voxels) w.put_f32(v);
  return w.finish();
}

Clip decode_clip(std::span<const std::uint8_t> bytes, const std::string& what) {
  ByteReader header(bytes, what);
  header.expect_magic(kClipMagic);
  Clip clip;
  clip.channels = header.get_u32();
  clip.frames = header.get_u32();
  clip.height = header.get_u32();
  clip.width = header.get_u32();
  const std::uint64_t expected = 20 + static_cast<std::uint64_t>(clip.size()) * 4 + 4;
  if (bytes.size() < expected)
    throw TruncationError(what + ": header declares " + std::to_string(clip.size()) + " voxels (" +
                          std::to_string(expected) + " bytes), file has " + std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw FormatError(what + ": " + std::to_string(bytes.size() - expected) + " bytes beyond the declared extents");
  ByteReader r(checked_content(bytes, what), what);
  r.expect_magic(kClipMagic);
  for (int i = 0; i < 4; ++i) r.get_u32();
  clip.voxels.resize(clip.size());
  for (float& v : clip.voxels) v = r.get_f32();
  return clip;
}

void save_landmarks(const std::filesystem::path& path, const LandmarkShot& shot) {
  write_file(path, encode_landmarks(shot));
}

LandmarkShot load_landmarks(const std::filesystem::path& path) {
  LandmarkShot shot = decode_landmarks(read_file(path), path.string());
  shot.shot_id = path.stem().string();
  return shot;
}

void save_clip(const std::filesystem::path& path, const Clip& clip) { write_file(path, encode_clip(clip)); }

Clip load_clip(const std::filesystem::path& path) {
  Clip clip = decode_clip(read_file(path), path.string());
  clip.shot_id = path.stem().string();
  return clip;
}

// Manifest --------------------------------------------------------------------

std::vector<std::string> DatasetManifest::subjects(int label) const {
  std::vector<std::string> ids;
  for (const auto& r : records)
    if (r.label == label && std::find(ids.begin(), ids.end(), r.subject_id) == ids.end()) ids.push_back(r.subject_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<const SampleRecord*> DatasetManifest::split_records(const std::string& split) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

const SampleRecord* DatasetManifest::find(const std::string& sample_id) const {
  for (const auto& r : records)
    if (r.sample_id == sample_id) return &r;
  return nullptr;
}

void save_manifest(const DatasetManifest& m) {
  std::string lines;
  for (const auto& r : m.records) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    j["subject_id"] = r.subject_id;
    j["label"] = r.label;
    j["split"] = r.split;
    j["landmark_path"] = r.landmark_path;
    j["clip_path"] = r.clip_path;
    if (r.demo_vector) j["demo_vector"] = *r.demo_vector;
    lines += j.dump() + "\n";
  }
  write_text_file(m.root / kManifestName, lines);
  nlohmann::ordered_json info;
  info["seed"] = m.seed;
  info["samples"] = m.records.size();
  info["generator_config"] = m.generator_config;
  write_text_file(m.root / kDatasetInfoName, info.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const bool is_dir = std::filesystem::is_directory(path);
  const std::filesystem::path file = is_dir ? path / kManifestName : path;
  DatasetManifest m;
  m.root = file.parent_path();
  const std::string text = read_text_file(file);
  std::size_t lineno = 0, start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = file.string() + ":" + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      SampleRecord r;
      r.sample_id = j.at("sample_id").get<std::string>();
      r.subject_id = j.at("subject_id").get<std::string>();
      r.label = j.at("label").get<int>();
      r.split = j.at("split").get<std::string>();
      r.landmark_path = j.at("landmark_path").get<std::string>();
      r.clip_path = j.at("clip_path").get<std::string>();
      if (j.contains("demo_vector")) r.demo_vector = j.at("demo_vector").get<std::vector<double>>();
      if (r.label != kSober && r.label != kIntoxicated)
        throw FormatError(where + ": label must be 0 or 1");
      if (r.split != "train" && r.split != "test") throw FormatError(where + ": split must be train or test");
      m.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
  }
  const auto info_path = m.root / kDatasetInfoName;
  if (std::filesystem::exists(info_path)) {
    try {
      const auto info = nlohmann::json::parse(read_text_file(info_path));
      m.seed = info.value("seed", std::uint64_t{0});
      m.generator_config = info.value("generator_config", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(info_path.string() + ": " + e.what());
    }
  }
  return m;
}

SampleData load_sample(const DatasetManifest& m, const SampleRecord& r, bool with_clip) {
  SampleData s;
  s.landmarks = load_landmarks(m.resolve(r.landmark_path));
  s.landmarks.shot_id = r.sample_id;
  if (with_clip) {
    s.clip = load_clip(m.resolve(r.clip_path));
    s.clip.shot_id = r.sample_id;
  }
  return s;
}

}  // namespace shotfuse
