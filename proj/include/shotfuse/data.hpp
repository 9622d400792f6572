#pragma once

// Seeded synthetic corpus: subjects with class-conditional behaviour latents,
// animated 68-point landmark shots, rendered clips, binary sample files and a
// JSON-lines manifest with a subject-independent split.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shotfuse/config.hpp"
#include "shotfuse/graph_branch.hpp"
#include "shotfuse/rng.hpp"
#include "shotfuse/visual_branch.hpp"

namespace shotfuse {

inline constexpr int kSober = 0;
inline constexpr int kIntoxicated = 1;

std::string label_name(int label);

using Range = std::pair<double, double>;

enum class DemographicsMode { None, Noise, Informative };

struct GeneratorConfig {
  std::size_t subjects_per_class = 10;
  std::size_t shots_per_subject = 4;
  std::size_t frames_per_shot = 32;
  double fps = 25.0;
  std::size_t clip_frames = 8;
  std::size_t clip_height = 32;
  std::size_t clip_width = 32;
  /// Square frame size the clip is drawn at before resampling.
  std::size_t render_size = 64;
  Range blink_interval{1.0, 2.0};  // seconds between blink onsets, both classes
  Range sober_blink_duration{0.1, 0.2};
  Range intoxicated_blink_duration{0.3, 0.6};
  /// Head-sway amplitude in inter-ocular units (translation) and radians (rotation).
  Range sober_sway{0.015, 0.025};
  Range intoxicated_sway{0.06, 0.10};
  /// Per-frame mouth landmark jitter, inter-ocular units.
  Range sober_jitter{0.0075, 0.0125};
  Range intoxicated_jitter{0.0375, 0.0625};
  /// Fraction of the open eye height removed at the middle of a blink.
  double blink_depth = 0.95;
  /// Landmark detector noise, inter-ocular units.
  double detector_noise = 0.003;
  /// Inter-ocular distance in pixels of the nominal 640x480 source frame.
  Range face_scale_px{40.0, 80.0};
  double train_fraction = 0.8;
  DemographicsMode demographics = DemographicsMode::Noise;

  static GeneratorConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
  /// Throws ConfigError on empty counts, negative durations or amplitudes.
  void validate() const;
  static std::vector<std::string> keys();
};

struct SubjectLatents {
  int label = kSober;
  double blink_interval = 0;
  double blink_duration = 0;
  double sway = 0;
  double jitter = 0;
  double face_scale_px = 0;
  Point2 face_center;
  /// Static per-subject offsets of the template, inter-ocular units.
  std::array<Point2, kLandmarkCount> identity{};
};

SubjectLatents draw_latents(const GeneratorConfig& cfg, int label, Rng& rng);

/// Neutral frontal face in inter-ocular units: eye centers at (-0.5, -0.3)
/// and (0.5, -0.3), image y pointing down.
LandmarkFrame neutral_face();

struct SynthShot {
  LandmarkShot landmarks;  // pixel coordinates
  Clip clip;               // resampled to the configured clip extents
  std::vector<double> openness;  // eye openness per frame, 1 = open
};

SynthShot simulate_shot(const GeneratorConfig& cfg, const SubjectLatents& subject, Rng& rng,
                        const std::string& shot_id);

/// Splats each landmark as a gaussian disc into a square crop around the shot's
/// mean face position; channel 0: jaw, brows and nose, 1: eyes, 2: mouth.
Clip render_clip(const GeneratorConfig& cfg, const LandmarkShot& shot, double face_scale_px);

// Sample files ---------------------------------------------------------------

std::vector<std::uint8_t> encode_landmarks(const LandmarkShot& shot);
LandmarkShot decode_landmarks(std::span<const std::uint8_t> bytes, const std::string& what);
std::vector<std::uint8_t> encode_clip(const Clip& clip);
Clip decode_clip(std::span<const std::uint8_t> bytes, const std::string& what);

void save_landmarks(const std::filesystem::path& path, const LandmarkShot& shot);
LandmarkShot load_landmarks(const std::filesystem::path& path);
void save_clip(const std::filesystem::path& path, const Clip& clip);
Clip load_clip(const std::filesystem::path& path);

// Manifest --------------------------------------------------------------------

struct SampleRecord {
  std::string sample_id;
  std::string subject_id;
  int label = kSober;
  std::string split = "train";
  std::string landmark_path;  // relative to the manifest directory
  std::string clip_path;
  std::optional<std::vector<double>> demo_vector;
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
  std::filesystem::path root;
  std::uint64_t seed = 0;
  std::string generator_config;  // key=value snapshot

  std::vector<std::string> subjects(int label) const;
  std::vector<const SampleRecord*> split_records(const std::string& split) const;
  const SampleRecord* find(const std::string& sample_id) const;
  std::filesystem::path resolve(const std::string& relative) const { return root / relative; }
};

inline constexpr const char* kManifestName = "manifest.jsonl";
inline constexpr const char* kDatasetInfoName = "dataset.json";

/// Writes manifest.jsonl (one record per line) and dataset.json (seed and
/// generator snapshot) into `m.root`.
void save_manifest(const DatasetManifest& m);
/// Accepts the manifest file or its directory.
DatasetManifest load_manifest(const std::filesystem::path& path);

struct SampleData {
  LandmarkShot landmarks;
  Clip clip;
};

/// Loads the sample's files. Clip loading is skipped when `with_clip` is false.
SampleData load_sample(const DatasetManifest& m, const SampleRecord& r, bool with_clip = true);

/// Generates every subject, writes sample files under `out_dir`, applies the
/// subject split and demographics, and saves the manifest. `jobs` > 1
/// generates subjects in parallel; output bytes do not depend on it.
DatasetManifest generate_dataset(const GeneratorConfig& cfg, std::uint64_t seed,
                                 const std::filesystem::path& out_dir, std::size_t jobs = 1);

/// Per class, shuffles subject ids with a seeded stream and assigns the first
/// round(fraction * n) (clamped to [1, n-1]) to train, the rest to test.
DatasetManifest subject_split(DatasetManifest m, double train_fraction, std::uint64_t seed);

inline constexpr std::size_t kDemographicsWidth = 10;  // age 2, gender 2, race 6

/// Static per-subject one-hot vector. Noise mode draws every group uniformly;
/// informative mode sets the age bucket to the label.
DatasetManifest attach_demographics(DatasetManifest m, std::uint64_t seed,
                                    DemographicsMode mode = DemographicsMode::Noise);

/// Experimental plumbing: frame indices t where the mean absolute difference
/// between frames t-1 and t exceeds `threshold`.
std::vector<std::size_t> detect_shot_boundaries(const Clip& video, double threshold);

}  // namespace shotfuse
