// Command-line front end: synth, train, eval, ablate, explain, inspect.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage
// error, 3 I/O error, 4 training divergence, 5 checkpoint or file format
// mismatch, 6 unknown sample id.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "shotfuse/interpret.hpp"
#include "shotfuse/serialize.hpp"
#include "shotfuse/train.hpp"

namespace fs = std::filesystem;
using namespace shotfuse;
using Real = float;

namespace {

constexpr int kExitUnexpected = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitFormat = 5;
constexpr int kExitUnknownSample = 6;

class UnknownSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 42;
  std::string config;
  std::string out;
  std::size_t threads = 1;
  std::string profile;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* profile_opt = nullptr;
};

/// Config-file entries with flag overrides applied; a differing file value is
/// replaced and noted on stderr.
KeyValues load_config(const Globals& g) {
  KeyValues kv;
  if (!g.config.empty()) kv = KeyValues::load(g.config);
  return kv;
}

void override_key(KeyValues& kv, const std::string& key, const std::string& value) {
  if (const std::string* old = kv.find(key); old && *old != value)
    std::cerr << "note: flag value " << key << "=" << value << " overrides config file value " << *old << "\n";
  kv.set(key, value);
}

KeyValues select(const KeyValues& kv, const std::vector<std::string>& keys) {
  KeyValues out;
  out.source = kv.source;
  for (const auto& [k, v] : kv.entries)
    if (std::find(keys.begin(), keys.end(), k) != keys.end()) out.set(k, v);
  return out;
}

void require_keys(const KeyValues& kv, std::initializer_list<std::vector<std::string>> groups) {
  std::vector<std::string> all;
  for (const auto& g : groups) all.insert(all.end(), g.begin(), g.end());
  kv.require_known(all);
}

void apply_globals(const Globals& g, KeyValues& kv) {
  if (*g.seed_opt) override_key(kv, "seed", std::to_string(g.seed));
  else if (!kv.find("seed")) kv.set("seed", std::to_string(g.seed));
  if (*g.profile_opt) override_key(kv, "profile", g.profile);
}

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
};

RunConfig run_config(const Globals& g, const KeyValues& file_kv, std::optional<std::size_t> epochs) {
  KeyValues kv = file_kv;
  require_keys(kv, {ModelConfig::keys(), TrainConfig::keys()});
  apply_globals(g, kv);
  if (epochs) override_key(kv, "epochs", std::to_string(*epochs));
  RunConfig rc;
  rc.model = ModelConfig::from_key_values(select(kv, ModelConfig::keys()));
  rc.train.apply(select(kv, TrainConfig::keys()));
  return rc;
}

fs::path out_dir(const Globals& g, const std::string& fallback) { return g.out.empty() ? fs::path(fallback) : fs::path(g.out); }

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

const SampleRecord& find_sample(const DatasetManifest& m, const std::string& id) {
  const SampleRecord* r = m.find(id);
  if (!r) throw UnknownSampleError("unknown sample_id '" + id + "' in " + (m.root / kManifestName).string());
  return *r;
}

std::vector<const SampleRecord*> split_records(const DatasetManifest& m, const std::string& split) {
  if (split == "all") {
    std::vector<const SampleRecord*> all;
    for (const auto& r : m.records) all.push_back(&r);
    return all;
  }
  if (split != "train" && split != "test") throw ConfigError("--split: expected train, test or all, got '" + split + "'");
  auto records = m.split_records(split);
  if (records.empty()) throw ConfigError("split '" + split + "' is empty");
  return records;
}

void print_metrics(const MetricsReport& r) {
  std::printf("%s: samples %zu  accuracy %.4f  precision %.4f%s  recall %.4f%s  loss %.4f\n", r.split.c_str(),
              r.predictions.size(), r.metrics.accuracy, r.metrics.precision,
              r.metrics.precision_defined ? "" : " (undefined)", r.metrics.recall,
              r.metrics.recall_defined ? "" : " (undefined)", r.loss);
  std::printf("confusion: tp %llu  tn %llu  fp %llu  fn %llu\n", static_cast<unsigned long long>(r.confusion.tp),
              static_cast<unsigned long long>(r.confusion.tn), static_cast<unsigned long long>(r.confusion.fp),
              static_cast<unsigned long long>(r.confusion.fn));
  if (r.mean_alpha) std::printf("mean alpha: %.4f\n", *r.mean_alpha);
  else std::printf("mean alpha: n/a\n");
}

std::string report_with_config(const MetricsReport& r, const ModelConfig& mc, const TrainConfig& tc) {
  auto j = nlohmann::ordered_json::parse(report_json(r));
  nlohmann::ordered_json model, train;
  for (const auto& [k, v] : mc.to_key_values().entries) model[k] = v;
  for (const auto& [k, v] : tc.to_key_values().entries) train[k] = v;
  j["model_config"] = model;
  j["train_config"] = train;
  return j.dump(2) + "\n";
}

// synth -------------------------------------------------------------------------------

struct SynthArgs {
  std::optional<std::size_t> subjects, shots;
  std::size_t jobs = 1;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  KeyValues kv = load_config(g);
  require_keys(kv, {GeneratorConfig::keys()});
  if (a.subjects) override_key(kv, "subjects_per_class", std::to_string(*a.subjects));
  if (a.shots) override_key(kv, "shots_per_subject", std::to_string(*a.shots));
  const GeneratorConfig cfg = GeneratorConfig::from_key_values(kv);
  if (a.jobs == 0) throw ConfigError("--jobs: must be positive");
  const fs::path out = out_dir(g, "data");
  const DatasetManifest m = generate_dataset(cfg, g.seed, out, a.jobs);

  std::printf("dataset: %s  seed %llu\n", out.string().c_str(), static_cast<unsigned long long>(g.seed));
  for (int label : {kSober, kIntoxicated}) {
    std::size_t train_subjects = 0, test_subjects = 0, train_samples = 0, test_samples = 0;
    for (const auto& id : m.subjects(label)) {
      bool is_train = false;
      for (const auto& r : m.records)
        if (r.subject_id == id) {
          is_train = r.split == "train";
          (is_train ? train_samples : test_samples)++;
        }
      (is_train ? train_subjects : test_subjects)++;
    }
    std::printf("%-12s subjects %zu (train %zu, test %zu)  samples train %zu, test %zu\n", label_name(label).c_str(),
                train_subjects + test_subjects, train_subjects, test_subjects, train_samples, test_samples);
  }
  std::printf("samples: %zu\n", m.records.size());
  ByteWriter all;
  auto add = [&all](const fs::path& p) {
    const auto bytes = read_file(p);
    all.put_bytes(bytes.data(), bytes.size());
  };
  add(m.root / kManifestName);
  add(m.root / kDatasetInfoName);
  for (const auto& r : m.records) {
    add(m.resolve(r.landmark_path));
    add(m.resolve(r.clip_path));
  }
  std::printf("checksum: crc32 %s\n", hex32(crc32(all.bytes())).c_str());
  return 0;
}

// train -------------------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::optional<std::size_t> epochs;
  std::string resume;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  const DatasetManifest m = load_manifest(a.manifest);
  const fs::path out = out_dir(g, "run");
  RunConfig rc;
  std::optional<CheckpointHeader> resume;
  if (!a.resume.empty()) {
    resume = read_checkpoint_header(a.resume);
    rc.model = resume->model;
    rc.train = resume->train;
    if (a.epochs) rc.train.epochs = *a.epochs;
    if (!g.config.empty() || *g.seed_opt || *g.profile_opt)
      std::cerr << "note: resuming uses the configuration stored in " << a.resume << "\n";
  } else {
    rc = run_config(g, load_config(g), a.epochs);
  }
  if (m.split_records("train").empty()) throw ConfigError("manifest has no train split");
  const ValidationSplit split = validation_split(m, rc.train.val_fraction, rc.train.seed);
  const auto train_inputs = load_inputs<Real>(rc.model, m, split.train);
  const auto val_inputs = load_inputs<Real>(rc.model, m, split.validation);

  FusionModel<Real> model(rc.model, rc.train.seed);
  TrainerState<Real> state = fresh_trainer_state(model, rc.train);
  if (resume) {
    load_checkpoint(a.resume, model, state);
    std::printf("resumed from %s after epoch %zu (step %llu)\n", a.resume.c_str(), state.epochs_done,
                static_cast<unsigned long long>(state.adam.step));
  }
  write_text_file(out / "config.txt", rc.model.to_key_values().to_text() + rc.train.to_key_values().to_text());
  std::printf("training %s (%s profile, dim %zu) on %zu samples, validating on %zu\n",
              variant_name(rc.model.variant).c_str(), rc.model.profile.c_str(), rc.model.dim, train_inputs.size(),
              val_inputs.size());
  TrainOptions opts;
  opts.checkpoint_dir = out / "checkpoints";
  opts.on_epoch = [](std::size_t epoch, const TrainHistory& h) {
    std::printf("epoch %3zu  train loss %.4f acc %.4f  val loss %.4f acc %.4f\n", epoch, h.train_loss.back(),
                h.train_accuracy.back(), h.val_loss.back(), h.val_accuracy.back());
    std::fflush(stdout);
  };
  const TrainResult<Real> result = train(model, train_inputs, val_inputs, rc.train, state, opts);
  std::printf("best validation epoch: %zu\n", result.best_epoch);

  const auto test_records = m.split_records("test");
  MetricsReport rep;
  if (!test_records.empty()) rep = evaluate(model, load_inputs<Real>(rc.model, m, test_records), "test");
  else rep.split = "test";
  rep.history = result.history;
  print_metrics(rep);
  write_text_file(out / "metrics.json", report_with_config(rep, rc.model, rc.train));
  std::printf("checkpoints: %s\nmetrics: %s\n", opts.checkpoint_dir.string().c_str(),
              (out / "metrics.json").string().c_str());
  return 0;
}

// eval --------------------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, manifest, split = "test";
};

std::pair<FusionModel<Real>, CheckpointHeader> restore(const std::string& path) {
  CheckpointHeader h = read_checkpoint_header(path);
  if (h.dtype_bytes != sizeof(Real))
    throw FormatError(path + ": stored with " + std::to_string(h.dtype_bytes * 8) + "-bit values, this tool uses " +
                      std::to_string(sizeof(Real) * 8) + "-bit");
  FusionModel<Real> model(h.model, h.train.seed);
  TrainerState<Real> state = fresh_trainer_state(model, h.train);
  load_checkpoint(path, model, state);
  return {std::move(model), std::move(h)};
}

int cmd_eval(const Globals& g, const EvalArgs& a) {
  auto [model, header] = restore(a.checkpoint);
  const DatasetManifest m = load_manifest(a.manifest);
  const auto inputs = load_inputs<Real>(header.model, m, split_records(m, a.split));
  const MetricsReport rep = evaluate(model, inputs, a.split);
  print_metrics(rep);
  const fs::path out = out_dir(g, ".") / ("eval_" + a.split + ".json");
  write_text_file(out, report_with_config(rep, header.model, header.train));
  std::printf("metrics: %s\n", out.string().c_str());
  return 0;
}

// ablate ------------------------------------------------------------------------------

struct AblateArgs {
  std::string manifest;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;
  std::optional<std::size_t> epochs;
};

int cmd_ablate(const Globals& g, const AblateArgs& a) {
  const auto known = ablation_variants();
  std::vector<std::string> variants = a.variants.empty() ? known : a.variants;
  for (const auto& v : variants)
    if (std::find(known.begin(), known.end(), v) == known.end()) {
      std::string list;
      for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
      throw ConfigError("unknown variant '" + v + "'; valid variants: " + list);
    }
  const RunConfig rc = run_config(g, load_config(g), a.epochs);
  const std::vector<std::uint64_t> seeds = a.seeds.empty() ? std::vector<std::uint64_t>{g.seed} : a.seeds;
  const DatasetManifest m = load_manifest(a.manifest);
  std::vector<AblationRow> rows;
  for (const auto& v : variants)
    for (auto seed : seeds) {
      rows.push_back(ablation_run<Real>(v, rc.model, rc.train, m, seed));
      std::printf("%-18s seed %-6llu accuracy %.4f\n", v.c_str(), static_cast<unsigned long long>(seed),
                  rows.back().metrics.accuracy);
      std::fflush(stdout);
    }
  const std::string table = ablation_table(rows);
  std::printf("\n%s", table.c_str());
  const fs::path out = out_dir(g, "ablation");
  write_text_file(out / "ablation.json", ablation_json(rows));
  write_text_file(out / "ablation.txt", table);
  std::printf("results: %s\n", (out / "ablation.json").string().c_str());
  return 0;
}

// explain -----------------------------------------------------------------------------

struct ExplainArgs {
  std::string checkpoint, manifest, sample_id, mode = "saliency";
  std::optional<int> target;
};

int cmd_explain(const Globals& g, const ExplainArgs& a) {
  if (a.mode != "saliency" && a.mode != "cam") throw ConfigError("--mode: expected saliency or cam");
  auto [model, header] = restore(a.checkpoint);
  const DatasetManifest m = load_manifest(a.manifest);
  const SampleRecord& rec = find_sample(m, a.sample_id);
  const ModelInput<Real> input = load_inputs<Real>(header.model, m, {&rec})[0];
  int target = 0;
  if (a.target) {
    target = *a.target;
  } else {
    const MetricsReport r = evaluate(model, std::vector<ModelInput<Real>>{input}, "explain");
    target = r.predictions[0].predicted;
  }
  const fs::path out = out_dir(g, "explain");
  if (a.mode == "saliency") {
    const SaliencyReport s = landmark_saliency(model, input, target);
    const fs::path path = out / ("saliency_" + a.sample_id + ".json");
    write_text_file(path, saliency_json(s));
    std::printf("saliency for %s (label %s, target %s)%s\n", a.sample_id.c_str(), label_name(rec.label).c_str(),
                label_name(target).c_str(), s.all_zero ? ": all-zero gradient" : "");
    for (const auto& r : s.regions)
      std::printf("  %-28s %-10s nodes %2zu-%2zu  %.4f\n", r.name.c_str(), r.indexing.c_str(), r.first, r.last,
                  r.mean);
    std::printf("report: %s\n", path.string().c_str());
  } else {
    const auto maps = grad_cam3d(model, input, target);
    const fs::path dir = out / ("cam_" + a.sample_id);
    const fs::path index = write_cam_files(dir, maps);
    for (const auto& mp : maps)
      std::printf("grad-cam shot %zu: map %zux%zux%zu, upsampled %zux%zux%zu\n", mp.shot, mp.cam_shape[0],
                  mp.cam_shape[1], mp.cam_shape[2], mp.upsampled_shape[0], mp.upsampled_shape[1],
                  mp.upsampled_shape[2]);
    std::printf("index: %s\n", index.string().c_str());
  }
  return 0;
}

// inspect -----------------------------------------------------------------------------

int cmd_inspect(const std::string& path) {
  const fs::path p(path);
  bool is_checkpoint = false;
  if (fs::is_regular_file(p) && p.filename() != kManifestName) {
    const auto bytes = read_file(p);
    is_checkpoint = bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) == "CKP1";
    if (!is_checkpoint) throw FormatError(path + ": neither a checkpoint nor a manifest");
  }
  if (is_checkpoint) {
    const CheckpointHeader h = read_checkpoint_header(p);
    std::printf("checkpoint %s\nformat version %u, %u-byte values\nepochs done %zu, optimizer step %llu\n",
                path.c_str(), h.version, h.dtype_bytes, h.epochs_done, static_cast<unsigned long long>(h.adam_step));
    std::printf("[model]\n%s[train]\n%s", h.model_text.c_str(), h.train_text.c_str());
    std::size_t total = 0;
    std::printf("[tensors]\n");
    for (const auto& [name, shape] : h.tensors) {
      std::printf("  %-28s %s\n", name.c_str(), shape_str(shape).c_str());
      total += shape_numel(shape);
    }
    std::printf("parameters: %zu\n", total);
    return 0;
  }
  const DatasetManifest m = load_manifest(p);
  std::printf("manifest %s\nseed %llu\nrecords %zu (train %zu, test %zu)\nsubjects: %zu sober, %zu intoxicated\n",
              (m.root / kManifestName).string().c_str(), static_cast<unsigned long long>(m.seed), m.records.size(),
              m.split_records("train").size(), m.split_records("test").size(), m.subjects(kSober).size(),
              m.subjects(kIntoxicated).size());
  std::printf("[generator]\n%s", m.generator_config.c_str());
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"shotfuse: dual-branch landmark and video classifier"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--config", g.config, "key=value configuration file");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--threads", g.threads, "Worker threads (only 1 is supported)")->capture_default_str();
  g.profile_opt = app.add_option("--profile", g.profile, "Model dimensions profile")
                      ->check(CLI::IsMember({"desk", "paper"}));

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate the synthetic dataset");
  s->add_option("--subjects", synth.subjects, "Subjects per class");
  s->add_option("--shots", synth.shots, "Shots per subject");
  s->add_option("--jobs", synth.jobs, "Parallel generation jobs")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("manifest", tr.manifest, "Dataset manifest or directory")->required();
  t->add_option("--epochs", tr.epochs, "Number of epochs");
  t->add_option("--resume", tr.resume, "Checkpoint to resume from");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("manifest", ev.manifest, "Dataset manifest or directory")->required();
  e->add_option("--split", ev.split, "train, test or all")->capture_default_str();

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Run ablation variants over seeds");
  a->add_option("manifest", ab.manifest, "Dataset manifest or directory")->required();
  a->add_option("--variants", ab.variants, "Comma-separated variants")->delimiter(',');
  a->add_option("--seeds", ab.seeds, "Comma-separated seeds")->delimiter(',');
  a->add_option("--epochs", ab.epochs, "Number of epochs");

  ExplainArgs ex;
  auto* x = app.add_subcommand("explain", "Landmark saliency or Grad-CAM for one sample");
  x->add_option("checkpoint", ex.checkpoint, "Checkpoint file")->required();
  x->add_option("manifest", ex.manifest, "Dataset manifest or directory")->required();
  x->add_option("sample_id", ex.sample_id, "Sample id")->required();
  x->add_option("--mode", ex.mode, "saliency or cam")->capture_default_str();
  x->add_option("--target", ex.target, "Target class (default: predicted class)");

  std::string inspect_path;
  auto* in = app.add_subcommand("inspect", "Print checkpoint or manifest headers");
  in->add_option("path", inspect_path, "Checkpoint file, manifest file or dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitConfig;
  }
  if (g.threads != 1) throw ConfigError("--threads: only single-threaded execution is supported");
  if (*s) return cmd_synth(g, synth);
  if (*t) return cmd_train(g, tr);
  if (*e) return cmd_eval(g, ev);
  if (*a) return cmd_ablate(g, ab);
  if (*x) return cmd_explain(g, ex);
  return cmd_inspect(inspect_path);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UnknownSampleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnknownSample;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const ChecksumError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const TruncationError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUnexpected;
  }
}
