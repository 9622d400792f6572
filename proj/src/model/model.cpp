#include "shotfuse/model.hpp"

#include <cmath>
#include <sstream>

namespace shotfuse {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::FusedWeighted: return "fused_weighted";
    case Variant::FusedConcat: return "fused_concat";
    case Variant::VisualOnly: return "visual_only";
    case Variant::LandmarksOnly: return "landmarks_only";
  }
  return "fused_weighted";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::FusedWeighted, Variant::FusedConcat, Variant::VisualOnly, Variant::LandmarksOnly})
    if (variant_name(v) == name) return v;
  throw ConfigError("unknown variant '" + name + "' (expected fused_weighted, fused_concat, visual_only, landmarks_only)");
}

namespace {

std::string list_text(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::int64_t v = parse_int(key, item);
    if (v <= 0) throw ConfigError(key + ": entries must be positive");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::size_t positive(const std::string& key, const std::string& value) {
  const std::int64_t v = parse_int(key, value);
  if (v <= 0) throw ConfigError(key + ": must be positive, got " + value);
  return static_cast<std::size_t>(v);
}

}  // namespace

ModelConfig ModelConfig::for_profile(const std::string& profile) {
  ModelConfig c;
  if (profile == "desk") {
    c.profile = "desk";
  } else if (profile == "paper") {
    c.profile = "paper";
    c.dim = 512;
    c.gat_hidden = 64;
    c.gat_embed = 128;
    c.r3d.stem_width = 64;
    c.r3d.stage_widths = {64, 128, 256, 512};
    c.r3d.stage_blocks = {2, 2, 2, 2};
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk or paper)");
  }
  c.r3d.embed_dim = c.dim;
  return c;
}

std::size_t ModelConfig::aux_width() const {
  return (aux_ear ? 2 : 0) + (aux_mar ? 2 : 0) + (aux_demographics ? kDemographicsWidth : 0);
}

std::vector<std::string> ModelConfig::keys() {
  return {"profile", "dim", "gat_hidden", "gat_embed", "gat_heads", "velocity", "velocity_scale", "attention_slope",
          "activation", "leaky_slope", "dropout", "variant", "fusion", "aux_ear", "aux_mar", "aux_demographics",
          "r3d_stem_width", "r3d_widths", "r3d_blocks"};
}

void ModelConfig::apply(const KeyValues& kv) {
  for (const auto& [k, v] : kv.entries) {
    if (k == "profile") profile = v;
    else if (k == "dim") dim = positive(k, v);
    else if (k == "gat_hidden") gat_hidden = positive(k, v);
    else if (k == "gat_embed") gat_embed = positive(k, v);
    else if (k == "gat_heads") gat_heads = positive(k, v);
    else if (k == "velocity") velocity = parse_bool(k, v);
    else if (k == "velocity_scale") velocity_scale = parse_double(k, v);
    else if (k == "attention_slope") attention_slope = parse_double(k, v);
    else if (k == "activation") activation = parse_activation(v);
    else if (k == "leaky_slope") leaky_slope = parse_double(k, v);
    else if (k == "dropout") {
      dropout = parse_double(k, v);
      if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout: must lie in [0, 1)");
    } else if (k == "variant") variant = parse_variant(v);
    else if (k == "fusion") {
      if (v == "gated") fusion = FusionMode::Gated;
      else if (v == "global") fusion = FusionMode::Global;
      else throw ConfigError("fusion: expected gated or global, got '" + v + "'");
    } else if (k == "aux_ear") aux_ear = parse_bool(k, v);
    else if (k == "aux_mar") aux_mar = parse_bool(k, v);
    else if (k == "aux_demographics") aux_demographics = parse_bool(k, v);
    else if (k == "r3d_stem_width") r3d.stem_width = positive(k, v);
    else if (k == "r3d_widths") r3d.stage_widths = parse_list(k, v);
    else if (k == "r3d_blocks") r3d.stage_blocks = parse_list(k, v);
  }
  r3d.embed_dim = dim;
  r3d.activation = activation;
  r3d.leaky_slope = leaky_slope;
  if (dim % 4 != 0) throw ConfigError("dim: must be a multiple of 4");
  if (gat_hidden % gat_heads != 0 || gat_embed % gat_heads != 0)
    throw ConfigError("gat_hidden and gat_embed must be divisible by gat_heads");
  if (r3d.stage_widths.size() != r3d.stage_blocks.size())
    throw ConfigError("r3d_widths and r3d_blocks must have the same length");
}

ModelConfig ModelConfig::from_key_values(const KeyValues& kv) {
  kv.require_known(keys());
  const std::string* p = kv.find("profile");
  ModelConfig c = for_profile(p ? *p : "desk");
  c.apply(kv);
  return c;
}

KeyValues ModelConfig::to_key_values() const {
  KeyValues kv;
  kv.set("profile", profile);
  kv.set("dim", std::to_string(dim));
  kv.set("gat_hidden", std::to_string(gat_hidden));
  kv.set("gat_embed", std::to_string(gat_embed));
  kv.set("gat_heads", std::to_string(gat_heads));
  kv.set("velocity", velocity ? "true" : "false");
  kv.set("velocity_scale", format_double(velocity_scale));
  kv.set("attention_slope", format_double(attention_slope));
  kv.set("activation", std::string(activation_name(activation)));
  kv.set("leaky_slope", format_double(leaky_slope));
  kv.set("dropout", format_double(dropout));
  kv.set("variant", variant_name(variant));
  kv.set("fusion", fusion == FusionMode::Gated ? "gated" : "global");
  kv.set("aux_ear", aux_ear ? "true" : "false");
  kv.set("aux_mar", aux_mar ? "true" : "false");
  kv.set("aux_demographics", aux_demographics ? "true" : "false");
  kv.set("r3d_stem_width", std::to_string(r3d.stem_width));
  kv.set("r3d_widths", list_text(r3d.stage_widths));
  kv.set("r3d_blocks", list_text(r3d.stage_blocks));
  return kv;
}

namespace {

template <class F>
std::pair<double, double> frame_stats(const LandmarkShot& shot, F per_frame) {
  if (shot.frames.empty()) throw ContractError("shot '" + shot.shot_id + "' has no frames");
  double s = 0, s2 = 0;
  for (const auto& f : shot.frames) {
    const double v = per_frame(f);
    s += v;
    s2 += v * v;
  }
  const double n = static_cast<double>(shot.frames.size());
  const double m = s / n;
  return {m, std::sqrt(std::max(0.0, s2 / n - m * m))};
}

}  // namespace

std::pair<double, double> ear_stats(const LandmarkShot& shot) {
  return frame_stats(shot, [](const LandmarkFrame& f) {
    return 0.5 * (compute_ear(f, Eye::Right) + compute_ear(f, Eye::Left));
  });
}

std::pair<double, double> mar_stats(const LandmarkShot& shot) {
  return frame_stats(shot, [](const LandmarkFrame& f) { return compute_mar(f); });
}

template <class T>
ModelInput<T> make_input(const ModelConfig& cfg, const SampleRecord& record, const std::vector<SampleData>& shots,
                         bool coords_require_grad) {
  if (shots.empty()) throw ContractError("sample '" + record.sample_id + "' has no shots");
  ModelInput<T> in;
  in.sample_id = record.sample_id;
  in.label = record.label;
  double ear_m = 0, ear_s = 0, mar_m = 0, mar_s = 0;
  for (const auto& s : shots) {
    if (cfg.uses_landmarks()) in.coords.push_back(shot_coordinates<T>(s.landmarks, coords_require_grad));
    if (cfg.uses_clips()) in.clips.push_back(clip_tensor<T>(s.clip));
    if (cfg.aux_ear) {
      const auto [m, sd] = ear_stats(s.landmarks);
      ear_m += m;
      ear_s += sd;
    }
    if (cfg.aux_mar) {
      const auto [m, sd] = mar_stats(s.landmarks);
      mar_m += m;
      mar_s += sd;
    }
  }
  const double n = static_cast<double>(shots.size());
  if (cfg.aux_ear) in.aux.insert(in.aux.end(), {static_cast<T>(ear_m / n), static_cast<T>(ear_s / n)});
  if (cfg.aux_mar) in.aux.insert(in.aux.end(), {static_cast<T>(mar_m / n), static_cast<T>(mar_s / n)});
  if (cfg.aux_demographics) {
    if (!record.demo_vector || record.demo_vector->size() != kDemographicsWidth)
      throw ConfigError("sample '" + record.sample_id + "' has no " + std::to_string(kDemographicsWidth) +
                        "-wide demographic vector");
    for (double v : *record.demo_vector) in.aux.push_back(static_cast<T>(v));
  }
  return in;
}

template <class T>
FusionModel<T>::FusionModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg), graph_(build_facial_graph()) {
  Rng rng(seed);
  const std::size_t node_in = cfg.velocity ? 4 : 2;
  gat.push_back(GatParams<T>::init(node_in, cfg.gat_hidden, cfg.gat_heads, rng));
  gat.push_back(GatParams<T>::init(cfg.gat_hidden, cfg.gat_embed, cfg.gat_heads, rng));
  lstm = LstmParams<T>::init(cfg.gat_embed, cfg.dim, rng);
  gru = GruParams<T>::init(cfg.dim, cfg.dim, rng);
  R3DConfig r = cfg.r3d;
  r.embed_dim = cfg.dim;
  r.activation = cfg.activation;
  r.leaky_slope = cfg.leaky_slope;
  r3d = R3DParams<T>::init(r, rng);
  if (cfg.aux_width() > 0) aux_projection = LinearParams<T>::init(cfg.dim + cfg.aux_width(), cfg.dim, rng);
  fusion = FusionParams<T>::init(cfg.fusion, cfg.dim, rng);
  head = HeadParams<T>::init(cfg.variant == Variant::FusedConcat ? 2 * cfg.dim : cfg.dim, cfg.dim, rng);
  head.dropout = cfg.dropout;
}

template <class T>
Tensor<T> FusionModel<T>::landmark_branch(const std::vector<const ModelInput<T>*>& batch) {
  std::vector<Tensor<T>> features;
  std::vector<std::size_t> frames;
  for (const auto* in : batch) {
    if (in->coords.empty()) throw ContractError("sample '" + in->sample_id + "' has no landmark shots");
    for (const auto& c : in->coords) {
      features.push_back(node_features(normalize_frames(c), cfg_.velocity, static_cast<T>(cfg_.velocity_scale)));
      frames.push_back(c.shape()[0]);
    }
  }
  const GatOptions opts{cfg_.attention_slope, cfg_.activation, cfg_.leaky_slope};
  Tensor<T> all = features.size() == 1 ? features[0] : concat(features, 0);
  Tensor<T> emb = frame_embed(all, graph_, gat, opts);
  std::vector<Tensor<T>> rows;
  std::size_t shot = 0, offset = 0;
  for (const auto* in : batch) {
    std::vector<Tensor<T>> shots;
    for (std::size_t k = 0; k < in->coords.size(); ++k, ++shot) {
      shots.push_back(mean(slice(emb, 0, offset, offset + frames[shot]), 0));
      offset += frames[shot];
    }
    rows.push_back(gru_forward(lstm_forward(shots, lstm), gru));
  }
  return stack(rows);
}

template <class T>
Tensor<T> FusionModel<T>::visual_branch(const std::vector<const ModelInput<T>*>& batch, Mode mode,
                                        Tensor<T>* last_stage) {
  std::vector<Tensor<T>> clips;
  for (const auto* in : batch) {
    if (in->clips.empty()) throw ContractError("sample '" + in->sample_id + "' has no clips");
    clips.insert(clips.end(), in->clips.begin(), in->clips.end());
  }
  Tensor<T> v = r3d_forward(stack(clips), r3d, mode, ConvAlgo::Im2col, last_stage);
  std::vector<Tensor<T>> rows;
  std::size_t offset = 0;
  for (const auto* in : batch) {
    const std::size_t k = in->clips.size();
    rows.push_back(mean(slice(v, 0, offset, offset + k), 0));
    offset += k;
  }
  return stack(rows);
}

template <class T>
ForwardResult<T> FusionModel<T>::forward(const std::vector<const ModelInput<T>*>& batch, Mode mode, Rng& rng) {
  if (batch.empty()) throw ContractError("forward: empty batch");
  ForwardResult<T> r;
  if (cfg_.uses_landmarks()) {
    r.f_land = landmark_branch(batch);
    if (aux_projection) {
      std::vector<T> aux;
      for (const auto* in : batch) {
        if (in->aux.size() != cfg_.aux_width())
          throw DimensionError("sample '" + in->sample_id + "' carries " + std::to_string(in->aux.size()) +
                               " auxiliary features, model expects " + std::to_string(cfg_.aux_width()));
        aux.insert(aux.end(), in->aux.begin(), in->aux.end());
      }
      Tensor<T> aux_t = Tensor<T>::from({batch.size(), cfg_.aux_width()}, std::move(aux));
      r.f_land = linear(concat<T>({r.f_land, aux_t}, 1), *aux_projection);
    }
  }
  if (cfg_.uses_clips()) r.f_vis = visual_branch(batch, mode, &r.last_stage);

  Tensor<T> fused;
  switch (cfg_.variant) {
    case Variant::FusedWeighted:
      r.alpha = gate_alpha(r.f_vis, r.f_land, fusion);
      fused = fuse(r.f_vis, r.f_land, r.alpha);
      break;
    case Variant::FusedConcat: fused = concat_fuse(r.f_vis, r.f_land); break;
    case Variant::VisualOnly: fused = r.f_vis; break;
    case Variant::LandmarksOnly: fused = r.f_land; break;
  }
  r.logits = reduce_head(fused, head, mode, cfg_.activation, static_cast<T>(cfg_.leaky_slope), rng);
  return r;
}

template <class T>
std::vector<std::pair<std::string, Tensor<T>>> FusionModel<T>::parameters() {
  std::vector<std::pair<std::string, Tensor<T>>> out;
  for (std::size_t i = 0; i < gat.size(); ++i) {
    out.emplace_back("gat" + std::to_string(i) + ".weight", gat[i].weight);
    out.emplace_back("gat" + std::to_string(i) + ".attention", gat[i].attention);
  }
  out.emplace_back("lstm.w_input", lstm.w_input);
  out.emplace_back("lstm.w_hidden", lstm.w_hidden);
  out.emplace_back("lstm.bias", lstm.bias);
  out.emplace_back("gru.w_input", gru.w_input);
  out.emplace_back("gru.w_hidden", gru.w_hidden);
  out.emplace_back("gru.bias_input", gru.bias_input);
  out.emplace_back("gru.bias_hidden", gru.bias_hidden);
  out.emplace_back("r3d.stem", r3d.stem_conv);
  out.emplace_back("r3d.stem_bn.gamma", r3d.stem_bn.gamma);
  out.emplace_back("r3d.stem_bn.beta", r3d.stem_bn.beta);
  for (std::size_t b = 0; b < r3d.blocks.size(); ++b) {
    auto& blk = r3d.blocks[b];
    const std::string p = "r3d.block" + std::to_string(b) + ".";
    out.emplace_back(p + "conv1", blk.conv1);
    out.emplace_back(p + "bn1.gamma", blk.bn1.gamma);
    out.emplace_back(p + "bn1.beta", blk.bn1.beta);
    out.emplace_back(p + "conv2", blk.conv2);
    out.emplace_back(p + "bn2.gamma", blk.bn2.gamma);
    out.emplace_back(p + "bn2.beta", blk.bn2.beta);
    if (blk.down_conv) {
      out.emplace_back(p + "down", *blk.down_conv);
      out.emplace_back(p + "down_bn.gamma", blk.down_bn->gamma);
      out.emplace_back(p + "down_bn.beta", blk.down_bn->beta);
    }
  }
  out.emplace_back("r3d.proj.weight", r3d.projection.weight);
  out.emplace_back("r3d.proj.bias", r3d.projection.bias);
  if (aux_projection) {
    out.emplace_back("aux.weight", aux_projection->weight);
    out.emplace_back("aux.bias", aux_projection->bias);
  }
  if (fusion.mode == FusionMode::Gated) {
    out.emplace_back("gate.weight", fusion.gate.weight);
    out.emplace_back("gate.bias", fusion.gate.bias);
  } else {
    out.emplace_back("gate.global_logit", fusion.global_logit);
  }
  out.emplace_back("head.fc1.weight", head.fc1.weight);
  out.emplace_back("head.fc1.bias", head.fc1.bias);
  out.emplace_back("head.bn1.gamma", head.bn1.gamma);
  out.emplace_back("head.bn1.beta", head.bn1.beta);
  out.emplace_back("head.fc2.weight", head.fc2.weight);
  out.emplace_back("head.fc2.bias", head.fc2.bias);
  out.emplace_back("head.bn2.gamma", head.bn2.gamma);
  out.emplace_back("head.bn2.beta", head.bn2.beta);
  out.emplace_back("head.out.weight", head.out.weight);
  out.emplace_back("head.out.bias", head.out.bias);
  return out;
}

template <class T>
std::vector<std::pair<std::string, std::vector<T>*>> FusionModel<T>::buffers() {
  std::vector<std::pair<std::string, std::vector<T>*>> out;
  auto add_bn = [&out](const std::string& name, BatchNormState<T>& bn) {
    out.emplace_back(name + ".running_mean", &bn.running_mean);
    out.emplace_back(name + ".running_var", &bn.running_var);
  };
  add_bn("r3d.stem_bn", r3d.stem_bn);
  for (std::size_t b = 0; b < r3d.blocks.size(); ++b) {
    auto& blk = r3d.blocks[b];
    const std::string p = "r3d.block" + std::to_string(b) + ".";
    add_bn(p + "bn1", blk.bn1);
    add_bn(p + "bn2", blk.bn2);
    if (blk.down_bn) add_bn(p + "down_bn", *blk.down_bn);
  }
  add_bn("head.bn1", head.bn1);
  add_bn("head.bn2", head.bn2);
  return out;
}

template struct ModelInput<float>;
template struct ModelInput<double>;
template ModelInput<float> make_input<float>(const ModelConfig&, const SampleRecord&, const std::vector<SampleData>&,
                                             bool);
template ModelInput<double> make_input<double>(const ModelConfig&, const SampleRecord&,
                                               const std::vector<SampleData>&, bool);
template class FusionModel<float>;
template class FusionModel<double>;

}  // namespace shotfuse
