#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "shotfuse/ops.hpp"
#include "shotfuse/serialize.hpp"
#include "shotfuse/train.hpp"

namespace shotfuse {

// Configuration ---------------------------------------------------------------

std::vector<std::string> TrainConfig::keys() {
  return {"epochs", "batch_size", "lr", "beta1", "beta2", "eps", "weight_decay", "val_fraction", "seed"};
}

void TrainConfig::apply(const KeyValues& kv) {
  auto count = [](const std::string& k, const std::string& v) {
    const auto n = parse_int(k, v);
    if (n <= 0) throw ConfigError(k + ": must be positive, got " + v);
    return static_cast<std::size_t>(n);
  };
  for (const auto& [k, v] : kv.entries) {
    if (k == "epochs") epochs = count(k, v);
    else if (k == "batch_size") batch_size = count(k, v);
    else if (k == "lr") adam.lr = parse_double(k, v);
    else if (k == "beta1") adam.beta1 = parse_double(k, v);
    else if (k == "beta2") adam.beta2 = parse_double(k, v);
    else if (k == "eps") adam.eps = parse_double(k, v);
    else if (k == "weight_decay") adam.weight_decay = parse_double(k, v);
    else if (k == "val_fraction") val_fraction = parse_double(k, v);
    else if (k == "seed") {
      const auto n = parse_int(k, v);
      if (n < 0) throw ConfigError("seed: must be nonnegative");
      seed = static_cast<std::uint64_t>(n);
    }
  }
  if (!(adam.lr > 0)) throw ConfigError("lr: must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1))
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  if (!(adam.eps > 0)) throw ConfigError("eps: must be positive");
  if (!(adam.weight_decay >= 0)) throw ConfigError("weight_decay: must be nonnegative");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ConfigError("val_fraction: must lie in (0, 1)");
  if (batch_size < 2) throw ConfigError("batch_size: must be at least 2");
}

KeyValues TrainConfig::to_key_values() const {
  KeyValues kv;
  kv.set("epochs", std::to_string(epochs));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("lr", format_double(adam.lr));
  kv.set("beta1", format_double(adam.beta1));
  kv.set("beta2", format_double(adam.beta2));
  kv.set("eps", format_double(adam.eps));
  kv.set("weight_decay", format_double(adam.weight_decay));
  kv.set("val_fraction", format_double(val_fraction));
  kv.set("seed", std::to_string(seed));
  return kv;
}

// Data ----------------------------------------------------------------------------

template <class T>
std::vector<ModelInput<T>> load_inputs(const ModelConfig& cfg, const DatasetManifest& m,
                                       const std::vector<const SampleRecord*>& records) {
  std::vector<ModelInput<T>> out;
  out.reserve(records.size());
  for (const auto* r : records) {
    const std::vector<SampleData> shots{load_sample(m, *r, cfg.uses_clips())};
    out.push_back(make_input<T>(cfg, *r, shots));
  }
  return out;
}

ValidationSplit validation_split(const DatasetManifest& m, double val_fraction, std::uint64_t seed) {
  std::vector<std::string> held;
  for (int label : {kSober, kIntoxicated}) {
    std::vector<std::string> ids;
    for (const auto& r : m.records)
      if (r.split == "train" && r.label == label && std::find(ids.begin(), ids.end(), r.subject_id) == ids.end())
        ids.push_back(r.subject_id);
    std::sort(ids.begin(), ids.end());
    if (ids.size() < 2)
      throw ConfigError("validation split: class " + label_name(label) + " has fewer than 2 train subjects");
    Rng rng(mix_seed(seed, 0x7A1D000ULL + static_cast<std::uint64_t>(label)));
    rng.shuffle(ids);
    const auto n = static_cast<double>(ids.size());
    const auto take =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(val_fraction * n)), 1, ids.size() - 1);
    held.insert(held.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take));
  }
  ValidationSplit s;
  for (const auto& r : m.records) {
    if (r.split != "train") continue;
    const bool val = std::find(held.begin(), held.end(), r.subject_id) != held.end();
    (val ? s.validation : s.train).push_back(&r);
  }
  return s;
}

// Evaluation ------------------------------------------------------------------------

template <class T>
MetricsReport evaluate(FusionModel<T>& model, const std::vector<ModelInput<T>>& inputs, const std::string& split) {
  MetricsReport rep;
  rep.split = split;
  if (inputs.empty()) return rep;
  NoGradGuard no_grad;
  Rng unused(0);
  double loss = 0, alpha_sum = 0;
  const bool weighted = model.config().variant == Variant::FusedWeighted;
  for (const auto& in : inputs) {
    reset_tape<T>();
    const ForwardResult<T> r = model.forward({&in}, Mode::Eval, unused);
    const Tensor<T> logits = r.logits;
    const double z0 = static_cast<double>(logits.data()[0]);
    const double z1 = static_cast<double>(logits.data()[1]);
    const double top = std::max(z0, z1);
    const double lse = top + std::log(std::exp(z0 - top) + std::exp(z1 - top));
    loss += lse - (in.label == kIntoxicated ? z1 : z0);
    Prediction p;
    p.sample_id = in.sample_id;
    p.label = in.label;
    p.predicted = z1 > z0 ? kIntoxicated : kSober;
    p.logit_sober = z0;
    p.logit_intoxicated = z1;
    if (weighted) {
      const Tensor<T> a = r.alpha;
      p.alpha = static_cast<double>(a.data()[0]);
      alpha_sum += *p.alpha;
    }
    rep.predictions.push_back(std::move(p));
  }
  reset_tape<T>();
  const double n = static_cast<double>(inputs.size());
  rep.loss = loss / n;
  rep.confusion = confusion_from_predictions(rep.predictions);
  rep.metrics = metrics_from_confusion(rep.confusion);
  if (weighted) rep.mean_alpha = alpha_sum / n;
  return rep;
}

// Checkpoints -------------------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "CKP1";
constexpr std::uint32_t kCheckpointVersion = 1;

nlohmann::ordered_json history_to_json(const TrainHistory& h) {
  nlohmann::ordered_json j;
  j["train_loss"] = h.train_loss;
  j["train_accuracy"] = h.train_accuracy;
  j["val_loss"] = h.val_loss;
  j["val_accuracy"] = h.val_accuracy;
  return j;
}

TrainHistory history_from_json(const std::string& text, const std::string& what) {
  try {
    const auto j = nlohmann::json::parse(text);
    TrainHistory h;
    h.train_loss = j.at("train_loss").get<std::vector<double>>();
    h.train_accuracy = j.at("train_accuracy").get<std::vector<double>>();
    h.val_loss = j.at("val_loss").get<std::vector<double>>();
    h.val_accuracy = j.at("val_accuracy").get<std::vector<double>>();
    return h;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": malformed training history: " + e.what());
  }
}

template <class T>
void put_values(ByteWriter& w, std::span<const T> values) {
  for (T v : values) {
    if constexpr (std::is_same_v<T, float>) w.put_f32(v);
    else w.put_f64(v);
  }
}

template <class T>
void get_values(ByteReader& r, std::span<T> out) {
  for (auto& v : out) {
    if constexpr (std::is_same_v<T, float>) v = r.get_f32();
    else v = r.get_f64();
  }
}

template <class T>
void put_tensor(ByteWriter& w, const std::string& name, const Shape& shape, std::span<const T> values) {
  w.put_string(name);
  w.put_u32(static_cast<std::uint32_t>(shape.size()));
  for (auto e : shape) w.put_u64(e);
  put_values(w, values);
}

struct TensorEntry {
  std::string name;
  Shape shape;
};

TensorEntry get_tensor_header(ByteReader& r) {
  TensorEntry e;
  e.name = r.get_string();
  const auto nd = r.get_u32();
  if (nd > 8) throw FormatError("tensor '" + e.name + "' has " + std::to_string(nd) + " axes");
  for (std::uint32_t i = 0; i < nd; ++i) e.shape.push_back(static_cast<std::size_t>(r.get_u64()));
  return e;
}

struct ParsedHeader {
  CheckpointHeader header;
  double best_val_accuracy = -1, best_val_loss = 0;
  std::size_t best_epoch = 0;
  TrainHistory history;
  std::string rng_state;
};

ParsedHeader parse_header(ByteReader& r, const std::string& what) {
  ParsedHeader p;
  auto& h = p.header;
  h.version = r.get_u32();
  if (h.version != kCheckpointVersion)
    throw FormatError(what + ": unsupported checkpoint version " + std::to_string(h.version));
  h.dtype_bytes = r.get_u32();
  if (h.dtype_bytes != 4 && h.dtype_bytes != 8)
    throw FormatError(what + ": invalid dtype width " + std::to_string(h.dtype_bytes));
  h.model_text = r.get_string();
  h.train_text = r.get_string();
  try {
    h.model = ModelConfig::from_key_values(KeyValues::parse(h.model_text, what + " (model)"));
    KeyValues tk = KeyValues::parse(h.train_text, what + " (train)");
    tk.require_known(TrainConfig::keys());
    h.train.apply(tk);
  } catch (const ConfigError& e) {
    throw FormatError(what + ": invalid embedded configuration: " + e.what());
  }
  h.epochs_done = static_cast<std::size_t>(r.get_u64());
  p.best_epoch = static_cast<std::size_t>(r.get_u64());
  p.best_val_accuracy = r.get_f64();
  p.best_val_loss = r.get_f64();
  p.history = history_from_json(r.get_string(), what);
  p.rng_state = r.get_string();
  h.adam_step = r.get_u64();
  return p;
}

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path& path, FusionModel<T>& model, const TrainConfig& train_cfg,
                     const TrainerState<T>& state) {
  ByteWriter w;
  w.put_bytes(kCheckpointMagic, 4);
  w.put_u32(kCheckpointVersion);
  w.put_u32(sizeof(T));
  w.put_string(model.config().to_key_values().to_text());
  w.put_string(train_cfg.to_key_values().to_text());
  w.put_u64(state.epochs_done);
  w.put_u64(state.best_epoch);
  w.put_f64(state.best_val_accuracy);
  w.put_f64(state.best_val_loss);
  w.put_string(history_to_json(state.history).dump());
  w.put_string(state.rng.state());
  w.put_u64(state.adam.step);
  const auto params = model.parameters();
  const auto buffers = model.buffers();
  w.put_u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, p] : params) put_tensor<T>(w, name, p.shape(), p.data());
  w.put_u32(static_cast<std::uint32_t>(buffers.size()));
  for (const auto& [name, b] : buffers) put_tensor<T>(w, name, {b->size()}, *b);
  const auto& a = state.adam;
  w.put_f64(a.config.lr);
  w.put_f64(a.config.beta1);
  w.put_f64(a.config.beta2);
  w.put_f64(a.config.eps);
  w.put_f64(a.config.weight_decay);
  w.put_u32(static_cast<std::uint32_t>(a.names.size()));
  for (std::size_t i = 0; i < a.names.size(); ++i) {
    w.put_string(a.names[i]);
    w.put_u64(a.m[i].size());
    put_values<T>(w, a.m[i]);
    put_values<T>(w, a.v[i]);
  }
  write_file(path, w.finish());
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const std::string what = path.string();
  ByteReader magic(bytes, what);
  magic.expect_magic(kCheckpointMagic);
  ByteReader r(checked_content(bytes, what), what);
  r.expect_magic(kCheckpointMagic);
  ParsedHeader p = parse_header(r, what);
  const auto n = r.get_u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    TensorEntry e = get_tensor_header(r);
    std::vector<std::uint8_t> skip(shape_numel(e.shape) * p.header.dtype_bytes);
    r.get_bytes(skip.data(), skip.size());
    p.header.tensors.emplace_back(e.name, e.shape);
  }
  return p.header;
}

template <class T>
void load_checkpoint(const std::filesystem::path& path, FusionModel<T>& model, TrainerState<T>& state) {
  const auto bytes = read_file(path);
  const std::string what = path.string();
  ByteReader magic(bytes, what);
  magic.expect_magic(kCheckpointMagic);
  ByteReader r(checked_content(bytes, what), what);
  r.expect_magic(kCheckpointMagic);
  ParsedHeader p = parse_header(r, what);
  if (p.header.dtype_bytes != sizeof(T))
    throw FormatError(what + ": stored with " + std::to_string(p.header.dtype_bytes * 8) +
                      "-bit values, loader expects " + std::to_string(sizeof(T) * 8) + "-bit");
  if (p.header.model.to_key_values().to_text() != model.config().to_key_values().to_text())
    throw FormatError(what + ": model configuration differs from the checkpoint's");

  auto read_into = [&](const std::string& expect_name, const Shape& expect_shape, std::span<T> out) {
    TensorEntry e = get_tensor_header(r);
    if (e.name != expect_name || e.shape != expect_shape)
      throw FormatError(what + ": expected tensor '" + expect_name + "' " + shape_str(expect_shape) + ", found '" +
                        e.name + "' " + shape_str(e.shape));
    get_values<T>(r, out);
  };
  auto params = model.parameters();
  if (r.get_u32() != params.size()) throw FormatError(what + ": parameter count mismatch");
  std::vector<std::vector<T>> values;
  for (auto& [name, t] : params) {
    values.emplace_back(t.numel());
    read_into(name, t.shape(), values.back());
  }
  auto buffers = model.buffers();
  if (r.get_u32() != buffers.size()) throw FormatError(what + ": buffer count mismatch");
  std::vector<std::vector<T>> buffer_values;
  for (auto& [name, b] : buffers) {
    buffer_values.emplace_back(b->size());
    read_into(name, {b->size()}, buffer_values.back());
  }
  AdamState<T> adam;
  adam.step = p.header.adam_step;
  adam.config.lr = r.get_f64();
  adam.config.beta1 = r.get_f64();
  adam.config.beta2 = r.get_f64();
  adam.config.eps = r.get_f64();
  adam.config.weight_decay = r.get_f64();
  const auto slots = r.get_u32();
  if (slots != params.size()) throw FormatError(what + ": optimizer slot count mismatch");
  for (std::uint32_t i = 0; i < slots; ++i) {
    adam.names.push_back(r.get_string());
    const auto n = static_cast<std::size_t>(r.get_u64());
    if (adam.names.back() != params[i].first || n != params[i].second.numel())
      throw FormatError(what + ": optimizer slot '" + adam.names.back() + "' does not match '" + params[i].first +
                        "'");
    adam.m.emplace_back(n);
    adam.v.emplace_back(n);
    get_values<T>(r, adam.m.back());
    get_values<T>(r, adam.v.back());
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after optimizer state");

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].second.mutable_data();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i].second = std::move(buffer_values[i]);
  state.adam = std::move(adam);
  state.rng.set_state(p.rng_state);
  state.epochs_done = p.header.epochs_done;
  state.best_epoch = p.best_epoch;
  state.best_val_accuracy = p.best_val_accuracy;
  state.best_val_loss = p.best_val_loss;
  state.history = std::move(p.history);
}

// Training ---------------------------------------------------------------------------

template <class T>
TrainerState<T> fresh_trainer_state(FusionModel<T>& model, const TrainConfig& cfg) {
  TrainerState<T> s;
  s.adam = AdamState<T>::init(model.parameters(), cfg.adam);
  s.rng = Rng(mix_seed(cfg.seed, 0x7124140ULL));
  return s;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  // Batch statistics are undefined for a single sample; fold it into the previous batch.
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

}  // namespace

template <class T>
TrainResult<T> train(FusionModel<T>& model, const std::vector<ModelInput<T>>& train_inputs,
                     const std::vector<ModelInput<T>>& val_inputs, const TrainConfig& cfg, TrainerState<T>& state,
                     const TrainOptions& options) {
  if (train_inputs.size() < 2) throw ConfigError("training needs at least 2 samples");
  auto params = model.parameters();
  for (std::size_t epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_inputs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    state.rng.shuffle(order);
    double loss_sum = 0;
    std::size_t correct = 0;
    MetricsReport val;
    try {
      for (const auto& idx : make_batches(order, cfg.batch_size)) {
        std::vector<const ModelInput<T>*> batch;
        std::vector<int> labels;
        for (auto i : idx) {
          batch.push_back(&train_inputs[i]);
          labels.push_back(train_inputs[i].label);
        }
        reset_tape<T>();
        for (auto& [name, p] : params) p.zero_grad();
        const ForwardResult<T> r = model.forward(batch, Mode::Train, state.rng);
        const Tensor<T> loss = cross_entropy(r.logits, labels);
        const double lv = static_cast<double>(loss.item());
        if (!std::isfinite(lv)) throw NumericError("loss is " + std::to_string(lv));
        backward(loss);
        adam_step(params, state.adam);
        loss_sum += lv * static_cast<double>(idx.size());
        const Tensor<T> logits = r.logits;
        for (std::size_t k = 0; k < idx.size(); ++k) {
          const int pred = logits.data()[2 * k + 1] > logits.data()[2 * k] ? kIntoxicated : kSober;
          correct += pred == labels[k];
        }
      }
      reset_tape<T>();
      for (auto& [name, p] : params) p.zero_grad();
      for (const auto& [name, p] : params)
        for (T v : p.data())
          if (!std::isfinite(v)) throw NumericError("parameter '" + name + "' is not finite");
      if (!val_inputs.empty()) {
        val = evaluate(model, val_inputs, "validation");
        if (!std::isfinite(val.loss)) throw NumericError("validation loss is not finite");
      }
    } catch (const NumericError& e) {
      reset_tape<T>();
      throw DivergenceError(epoch, e.what());
    }
    const double n = static_cast<double>(train_inputs.size());
    state.history.train_loss.push_back(loss_sum / n);
    state.history.train_accuracy.push_back(static_cast<double>(correct) / n);
    bool improved = false;
    if (!val_inputs.empty()) {
      const MetricsReport& v = val;
      state.history.val_loss.push_back(v.loss);
      state.history.val_accuracy.push_back(v.metrics.accuracy);
      improved = state.best_epoch == 0 || v.metrics.accuracy > state.best_val_accuracy ||
                 (v.metrics.accuracy == state.best_val_accuracy && v.loss < state.best_val_loss);
      if (improved) {
        state.best_val_accuracy = v.metrics.accuracy;
        state.best_val_loss = v.loss;
      }
    } else {
      improved = true;
    }
    if (improved) state.best_epoch = epoch;
    state.epochs_done = epoch;
    if (!options.checkpoint_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03zu.ckp", epoch);
      const auto epoch_path = options.checkpoint_dir / name;
      save_checkpoint(epoch_path, model, cfg, state);
      const auto bytes = read_file(epoch_path);
      write_file(options.checkpoint_dir / "last.ckp", bytes);
      if (improved) write_file(options.checkpoint_dir / "best.ckp", bytes);
    }
    if (options.on_epoch) options.on_epoch(epoch, state.history);
  }
  return {state.history, state.best_epoch};
}

// Ablations -------------------------------------------------------------------------

std::vector<std::string> ablation_variants() {
  return {"visual_only", "landmarks_only", "fused_weighted", "fused_concat", "act=relu",
          "act=swish",   "act=leaky_relu", "+ear",           "+mar",         "+demographics"};
}

ModelConfig variant_config(const ModelConfig& base, const std::string& variant) {
  ModelConfig c = base;
  if (variant == "visual_only") c.variant = Variant::VisualOnly;
  else if (variant == "landmarks_only") c.variant = Variant::LandmarksOnly;
  else if (variant == "fused_weighted") c.variant = Variant::FusedWeighted;
  else if (variant == "fused_concat") c.variant = Variant::FusedConcat;
  else if (variant.rfind("act=", 0) == 0) {
    c.activation = parse_activation(variant.substr(4));
    c.r3d.activation = c.activation;
  } else if (variant == "+ear") c.aux_ear = true;
  else if (variant == "+mar") c.aux_mar = true;
  else if (variant == "+demographics") c.aux_demographics = true;
  else throw ConfigError("unknown ablation variant '" + variant + "'");
  return c;
}

template <class T>
AblationRow ablation_run(const std::string& variant, const ModelConfig& base, TrainConfig train_cfg,
                         const DatasetManifest& m, std::uint64_t seed) {
  const ModelConfig mc = variant_config(base, variant);
  train_cfg.seed = seed;
  const ValidationSplit split = validation_split(m, train_cfg.val_fraction, seed);
  const auto train_inputs = load_inputs<T>(mc, m, split.train);
  const auto val_inputs = load_inputs<T>(mc, m, split.validation);
  const auto test_inputs = load_inputs<T>(mc, m, m.split_records("test"));
  FusionModel<T> model(mc, seed);
  TrainerState<T> state = fresh_trainer_state(model, train_cfg);
  train(model, train_inputs, val_inputs, train_cfg, state, {});
  const MetricsReport rep = evaluate(model, test_inputs, "test");
  return {variant, seed, rep.metrics, rep.mean_alpha};
}

#define SHOTFUSE_INSTANTIATE(T)                                                                                  \
  template std::vector<ModelInput<T>> load_inputs<T>(const ModelConfig&, const DatasetManifest&,                 \
                                                     const std::vector<const SampleRecord*>&);                   \
  template MetricsReport evaluate<T>(FusionModel<T>&, const std::vector<ModelInput<T>>&, const std::string&);    \
  template void save_checkpoint<T>(const std::filesystem::path&, FusionModel<T>&, const TrainConfig&,            \
                                   const TrainerState<T>&);                                                      \
  template void load_checkpoint<T>(const std::filesystem::path&, FusionModel<T>&, TrainerState<T>&);             \
  template TrainerState<T> fresh_trainer_state<T>(FusionModel<T>&, const TrainConfig&);                          \
  template TrainResult<T> train<T>(FusionModel<T>&, const std::vector<ModelInput<T>>&,                           \
                                   const std::vector<ModelInput<T>>&, const TrainConfig&, TrainerState<T>&,      \
                                   const TrainOptions&);                                                         \
  template AblationRow ablation_run<T>(const std::string&, const ModelConfig&, TrainConfig,                      \
                                       const DatasetManifest&, std::uint64_t);

SHOTFUSE_INSTANTIATE(float)
SHOTFUSE_INSTANTIATE(double)

}  // namespace shotfuse
