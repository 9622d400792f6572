#pragma once

// Adam, the training loop with per-epoch and best checkpoints, evaluation
// metrics and the ablation runner.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shotfuse/model.hpp"

namespace shotfuse {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

template <class T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;

  static AdamState init(const std::vector<std::pair<std::string, Tensor<T>>>& params, const AdamConfig& config);
};

/// One Adam update with bias correction. Decoupled weight decay
/// p <- p - lr * wd * p is applied before the Adam delta. Parameters without a
/// gradient buffer are treated as having zero gradient. Throws DimensionError
/// when the parameter list does not match the state and NumericError naming
/// the parameter when a gradient is not finite.
template <class T>
void adam_step(const std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& state);

struct ConfusionMatrix {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::uint64_t total() const { return tp + tn + fp + fn; }
};

struct Metrics {
  double accuracy = 0, precision = 0, recall = 0;
  /// False when the denominator was zero and the metric is reported as 0.
  bool precision_defined = true, recall_defined = true;
};

/// accuracy = (TP+TN)/total, precision = TP/(TP+FP), recall = TP/(TP+FN);
/// positive class = intoxicated.
Metrics metrics_from_confusion(const ConfusionMatrix& c);

struct Prediction {
  std::string sample_id;
  int label = 0;
  int predicted = 0;
  double logit_sober = 0, logit_intoxicated = 0;
  std::optional<double> alpha;
};

ConfusionMatrix confusion_from_predictions(const std::vector<Prediction>& predictions);

struct TrainHistory {
  std::vector<double> train_loss, train_accuracy, val_loss, val_accuracy;
};

struct MetricsReport {
  std::string split;
  ConfusionMatrix confusion;
  Metrics metrics;
  std::optional<double> mean_alpha;
  std::vector<Prediction> predictions;
  TrainHistory history;
  double loss = 0;
};

/// JSON text of a report (fixed key order).
std::string report_json(const MetricsReport& r);

struct TrainConfig {
  std::size_t epochs = 25;
  std::size_t batch_size = 8;
  AdamConfig adam;
  /// Fraction of train subjects per class held out for validation (at least one).
  double val_fraction = 0.1;
  std::uint64_t seed = 42;

  void apply(const KeyValues& kv);
  KeyValues to_key_values() const;
  static std::vector<std::string> keys();
};

/// Reads each record's files and prepares model inputs; each record is a
/// one-shot sequence.
template <class T>
std::vector<ModelInput<T>> load_inputs(const ModelConfig& cfg, const DatasetManifest& m,
                                       const std::vector<const SampleRecord*>& records);

struct ValidationSplit {
  std::vector<const SampleRecord*> train;
  std::vector<const SampleRecord*> validation;
};

/// Holds out round(val_fraction * n) train subjects per class, clamped to
/// [1, n-1], chosen with a seeded stream.
ValidationSplit validation_split(const DatasetManifest& m, double val_fraction, std::uint64_t seed);

/// Evaluates in eval mode without recording gradients, one sample at a time.
template <class T>
MetricsReport evaluate(FusionModel<T>& model, const std::vector<ModelInput<T>>& inputs, const std::string& split);

/// Raised when the training loss or a gradient is not finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : std::runtime_error("training diverged in epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

template <class T>
struct TrainerState {
  AdamState<T> adam;
  Rng rng;
  std::size_t epochs_done = 0;
  double best_val_accuracy = -1;
  double best_val_loss = 0;
  std::size_t best_epoch = 0;
  TrainHistory history;
};

struct TrainOptions {
  /// Directory for epoch_NNN.ckp, best.ckp and last.ckp; empty disables checkpoints.
  std::filesystem::path checkpoint_dir;
  /// Called after each epoch with (epoch index from 1, history so far).
  std::function<void(std::size_t, const TrainHistory&)> on_epoch;
};

template <class T>
struct TrainResult {
  TrainHistory history;
  std::size_t best_epoch = 0;
};

/// Trains on `train`, validating on `validation` after every epoch. `state`
/// carries optimizer, RNG and history; passing a state restored from a
/// checkpoint resumes. Checkpoints are written after every completed epoch.
template <class T>
TrainResult<T> train(FusionModel<T>& model, const std::vector<ModelInput<T>>& train_inputs,
                     const std::vector<ModelInput<T>>& val_inputs, const TrainConfig& cfg, TrainerState<T>& state,
                     const TrainOptions& options);

template <class T>
TrainerState<T> fresh_trainer_state(FusionModel<T>& model, const TrainConfig& cfg);

// Checkpoints -------------------------------------------------------------------

template <class T>
void save_checkpoint(const std::filesystem::path& path, FusionModel<T>& model, const TrainConfig& train_cfg,
                     const TrainerState<T>& state);

struct CheckpointHeader {
  std::uint32_t version = 0;
  std::uint32_t dtype_bytes = 0;
  ModelConfig model;
  TrainConfig train;
  std::string model_text, train_text;
  std::size_t epochs_done = 0;
  std::uint64_t adam_step = 0;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> tensors;
};

/// Verifies the checksum and parses everything up to the tensor directory.
CheckpointHeader read_checkpoint_header(const std::filesystem::path& path);

/// Restores parameters, BN statistics and trainer state into a model built
/// from the checkpoint's own configuration. Throws FormatError on dtype or
/// tensor mismatches.
template <class T>
void load_checkpoint(const std::filesystem::path& path, FusionModel<T>& model, TrainerState<T>& state);

// Ablations -----------------------------------------------------------------------

/// Accepted names: visual_only, landmarks_only, fused_weighted, fused_concat,
/// act=relu|swish|leaky_relu, +ear, +mar, +demographics.
ModelConfig variant_config(const ModelConfig& base, const std::string& variant);
std::vector<std::string> ablation_variants();

struct AblationRow {
  std::string variant;
  std::uint64_t seed = 0;
  Metrics metrics;
  std::optional<double> mean_alpha;
};

/// Trains the variant from scratch with `seed` on the manifest's train split
/// and evaluates on its test split.
template <class T>
AblationRow ablation_run(const std::string& variant, const ModelConfig& base, TrainConfig train_cfg,
                         const DatasetManifest& m, std::uint64_t seed);

std::string ablation_json(const std::vector<AblationRow>& rows);
/// Aligned text table with per-variant medians.
std::string ablation_table(const std::vector<AblationRow>& rows);
double median(std::vector<double> values);

}  // namespace shotfuse
