// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 when any
// criterion fails. The optional first argument is a scratch directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "shotfuse/gradcheck.hpp"
#include "shotfuse/interpret.hpp"
#include "shotfuse/ops.hpp"
#include "shotfuse/serialize.hpp"
#include "shotfuse/train.hpp"

using namespace shotfuse;
namespace fs = std::filesystem;
using TensorD = Tensor<double>;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

TensorD random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return TensorD::from(std::move(shape), std::move(v), requires_grad);
}

/// Random values with |x| >= 0.1 so that kinked activations stay differentiable.
TensorD away_from_zero(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    x = rng.uniform(0.1, 2.0);
    if (rng.bernoulli(0.5)) x = -x;
  }
  return TensorD::from(std::move(shape), std::move(v), true);
}

TensorD weighted_sum(const TensorD& y) {
  std::vector<double> w(y.numel());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.7 * std::sin(1.3 * static_cast<double>(i) + 0.2);
  return sum(mul(y, TensorD::from(y.shape(), std::move(w))));
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// 1 ------------------------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  constexpr double h = 1e-5;
  std::vector<std::pair<std::string, double>> results;
  auto check = [&](const std::string& layer, const std::function<TensorD()>& loss,
                   std::vector<std::pair<std::string, TensorD>> params, std::size_t probes = 0) {
    const GradCheckReport r = check_gradients<double>(loss, std::move(params), h, probes);
    reset_tape<double>();
    results.emplace_back(layer, r.max_rel_error());
  };
  Rng rng(2024);

  auto lin = LinearParams<double>::init(4, 3, rng);
  lin.bias = random_tensor({3}, rng);
  TensorD xl = random_tensor({5, 4}, rng);
  check("linear", [&] { return weighted_sum(linear(xl, lin)); }, {{"x", xl}, {"W", lin.weight}, {"b", lin.bias}});

  TensorD xa = away_from_zero({3, 7}, rng);
  for (Activation a : {Activation::Relu, Activation::LeakyRelu, Activation::Swish, Activation::Sigmoid})
    check("activation " + std::string(activation_name(a)), [&] { return weighted_sum(activate(xa, a)); },
          {{"x", xa}});
  check("activation tanh", [&] { return weighted_sum(tanh(xa)); }, {{"x", xa}});

  TensorD xs = random_tensor({3, 5}, rng);
  check("softmax", [&] { return weighted_sum(softmax(xs, -1)); }, {{"x", xs}});
  check("log_softmax", [&] { return weighted_sum(log_softmax(xs, 0)); }, {{"x", xs}});

  auto bn = BatchNormState<double>::init(4);
  bn.gamma = random_tensor({4}, rng, 0.5, 1.5);
  bn.beta = random_tensor({4}, rng);
  TensorD xb = random_tensor({6, 4}, rng);
  check("batchnorm train", [&] { return weighted_sum(batchnorm(xb, bn, Mode::Train)); },
        {{"x", xb}, {"gamma", bn.gamma}, {"beta", bn.beta}});
  check("batchnorm eval", [&] { return weighted_sum(batchnorm(xb, bn, Mode::Eval)); },
        {{"x", xb}, {"gamma", bn.gamma}, {"beta", bn.beta}});
  auto bn3 = BatchNormState<double>::init(3);
  TensorD xv = random_tensor({2, 3, 2, 2, 2}, rng);
  check("batchnorm3d train", [&] { return weighted_sum(batchnorm(xv, bn3, Mode::Train)); }, {{"x", xv}});

  Rng drop_rng(5);
  check("dropout off (eval)", [&] { return weighted_sum(dropout(xs, 0.5, Mode::Eval, drop_rng)); }, {{"x", xs}});
  check("dropout off (rate 0)", [&] { return weighted_sum(dropout(xs, 0.0, Mode::Train, drop_rng)); }, {{"x", xs}});

  TensorD xc = random_tensor({1, 2, 4, 4, 4}, rng);
  TensorD kc = random_tensor({3, 2, 3, 3, 3}, rng);
  TensorD bc = random_tensor({3}, rng);
  for (ConvAlgo algo : {ConvAlgo::Direct, ConvAlgo::Im2col})
    check(std::string("conv3d ") + (algo == ConvAlgo::Direct ? "direct" : "im2col"),
          [&] { return weighted_sum(conv3d(xc, kc, bc, {{2, 1, 2}, {1, 1, 1}}, algo)); },
          {{"x", xc}, {"k", kc}, {"b", bc}});

  TensorD xp = random_tensor({1, 2, 5, 4, 3}, rng);
  check("adaptive_avg_pool3d", [&] { return weighted_sum(adaptive_avg_pool3d(xp, {2, 3, 2})); }, {{"x", xp}});
  TensorD p1 = random_tensor({4}, rng), p2 = random_tensor({4}, rng), p3 = random_tensor({4}, rng);
  check("shot mean pool", [&] { return weighted_sum(mean_pool<double>({p1, p2, p3})); },
        {{"a", p1}, {"b", p2}, {"c", p3}});

  const FacialGraph graph = build_facial_graph();
  auto gat = GatParams<double>::init(4, 6, 2, rng);
  TensorD xg = random_tensor({2, 68, 4}, rng, -1.0, 1.0);
  GatOptions gopts;
  gopts.activation = Activation::Swish;
  check("gat", [&] { return weighted_sum(gat_layer(xg, graph, gat, gopts)); },
        {{"W", gat.weight}, {"a", gat.attention}, {"x", xg}});

  auto lstm = LstmParams<double>::init(3, 2, rng);
  std::vector<TensorD> seq = {random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
  check("lstm", [&] { return weighted_sum(lstm_forward(seq, lstm).back()); },
        {{"Wx", lstm.w_input}, {"Wh", lstm.w_hidden}, {"b", lstm.bias}, {"x0", seq[0]}});
  auto gru = GruParams<double>::init(3, 2, rng);
  check("gru", [&] { return weighted_sum(gru_forward(seq, gru)); },
        {{"Wx", gru.w_input}, {"Wh", gru.w_hidden}, {"bx", gru.bias_input}, {"bh", gru.bias_hidden}, {"x1", seq[1]}});

  auto gate = FusionParams<double>::init(FusionMode::Gated, 5, rng);
  TensorD fv = random_tensor({3, 5}, rng, -1, 1), fl = random_tensor({3, 5}, rng, -1, 1);
  check("gate and fusion", [&] { return weighted_sum(fuse(fv, fl, gate_alpha(fv, fl, gate))); },
        {{"f_vis", fv}, {"f_land", fl}, {"gate.W", gate.gate.weight}, {"gate.b", gate.gate.bias}});
  auto global = FusionParams<double>::init(FusionMode::Global, 5, rng);
  global.global_logit = TensorD::from({1}, {-0.3}, true);
  check("global gate", [&] { return weighted_sum(fuse(fv, fl, gate_alpha(fv, fl, global))); },
        {{"f_vis", fv}, {"logit", global.global_logit}});

  auto head = HeadParams<double>::init(8, 8, rng);
  head.dropout = 0;
  TensorD xh = random_tensor({4, 8}, rng);
  Rng head_rng(6);
  check("head (dropout off)",
        [&] { return weighted_sum(reduce_head(xh, head, Mode::Train, Activation::Swish, 0.01, head_rng)); },
        {{"x", xh}, {"fc1", head.fc1.weight}, {"fc2", head.fc2.weight}, {"out", head.out.weight},
         {"bn1.gamma", head.bn1.gamma}});

  TensorD logits = random_tensor({4, 2}, rng);
  check("cross_entropy", [&] { return cross_entropy(logits, {0, 1, 1, 0}); }, {{"logits", logits}});

  auto block = ResidualBlock3dParams<double>::init(2, 3, 2, rng);
  TensorD xr = random_tensor({2, 2, 4, 4, 4}, rng);
  check("residual block 3d",
        [&] { return weighted_sum(residual_block3d(xr, block, Mode::Train, Activation::Swish, 0.01)); },
        {{"x", xr}, {"conv1", block.conv1}, {"conv2", block.conv2}, {"down", *block.down_conv}}, 24);

  const double elapsed = seconds_since(t0);
  double worst = 0;
  std::string worst_layer;
  for (const auto& [layer, e] : results)
    if (e >= worst) {
      worst = e;
      worst_layer = layer;
    }
  return {worst < 1e-6 && elapsed < 300,
          std::to_string(results.size()) + " layer checks, worst " + fmt("%.2e", worst) + " (" + worst_layer + "), " +
              fmt("%.1f", elapsed) + " s"};
}

// 2 ------------------------------------------------------------------------------------

Outcome gat_invariants() {
  Rng rng(16);
  const FacialGraph g = build_facial_graph();
  auto p = GatParams<double>::init(4, 8, 2, rng);
  TensorD x = random_tensor({2, 68, 4}, rng, -2, 2, false);
  std::vector<double> alpha;
  gat_layer(x, g, p, GatOptions{}, &alpha);
  double row_err = 0;
  std::size_t offset = 0;
  for (std::size_t fh = 0; fh < 4; ++fh)
    for (std::size_t i = 0; i < g.neighbors.size(); ++i) {
      double total = 0;
      for (std::size_t q = 0; q < g.neighbors[i].size(); ++q) total += alpha[offset + q];
      row_err = std::max(row_err, std::abs(total - 1.0));
      offset += g.neighbors[i].size();
    }

  const std::vector<std::pair<std::size_t, std::size_t>> edges = {
      {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {2, 6}};
  const std::vector<std::size_t> perm = {3, 7, 0, 5, 1, 6, 2, 4};
  std::vector<std::pair<std::size_t, std::size_t>> permuted;
  for (auto [u, v] : edges) permuted.emplace_back(perm[u], perm[v]);
  const FacialGraph small = FacialGraph::from_edges(8, edges);
  const FacialGraph small_p = FacialGraph::from_edges(8, permuted);
  auto q = GatParams<double>::init(3, 6, 2, rng);
  TensorD y = random_tensor({8, 3}, rng, -1, 1, false);
  std::vector<double> yp(24);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t d = 0; d < 3; ++d) yp[perm[i] * 3 + d] = y.data()[i * 3 + d];
  const TensorD h = gat_layer(y, small, q, GatOptions{});
  const TensorD hp = gat_layer(TensorD::from({8, 3}, yp), small_p, q, GatOptions{});
  double perm_err = 0;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t d = 0; d < 6; ++d)
      perm_err = std::max(perm_err, std::abs(hp.data()[perm[i] * 6 + d] - h.data()[i * 6 + d]));
  return {row_err <= 1e-12 && perm_err <= 1e-10,
          "row-sum error " + fmt("%.2e", row_err) + ", permutation error " + fmt("%.2e", perm_err)};
}

// 3 ------------------------------------------------------------------------------------

Outcome fusion_identities() {
  Rng rng(33);
  TensorD v = random_tensor({4, 16}, rng, -1, 1, false), l = random_tensor({4, 16}, rng, -1, 1, false);
  bool exact = true;
  const TensorD at1 = fuse(v, l, TensorD::full({4}, 1.0));
  const TensorD at0 = fuse(v, l, TensorD::zeros({4}));
  for (std::size_t i = 0; i < v.numel(); ++i) exact = exact && at1.data()[i] == v.data()[i] && at0.data()[i] == l.data()[i];
  bool same = true;
  for (int k = 0; k <= 20; ++k) {
    const TensorD f = fuse(v, v, TensorD::full({4}, k / 20.0));
    for (std::size_t i = 0; i < v.numel(); ++i) same = same && f.data()[i] == v.data()[i];
  }
  auto gate = FusionParams<double>::init(FusionMode::Gated, 16, rng);
  double lo = 1, hi = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const TensorD a = gate_alpha(random_tensor({10, 16}, rng, -5, 5, false), random_tensor({10, 16}, rng, -5, 5, false), gate);
    for (double x : a.data()) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  const bool range = lo > 0 && hi < 1;
  return {exact && same && range, std::string("alpha=0/1 exact: ") + (exact ? "yes" : "no") +
                                       ", equal branches invariant: " + (same ? "yes" : "no") + ", alpha over 10^4 gates: min " +
                                       fmt("%.3e", lo) + ", 1 - max " + fmt("%.3e", 1 - hi)};
}

// 4 ------------------------------------------------------------------------------------

Outcome metric_identities(const DatasetManifest& m) {
  const Metrics w = metrics_from_confusion(ConfusionMatrix{97, 95, 3, 5});
  const bool worked = std::abs(w.accuracy - 0.96) <= 1e-10 && std::abs(w.precision - 0.97) <= 1e-10 &&
                      std::abs(w.recall - 0.95098) <= 1e-5 && std::abs(w.recall - 97.0 / 102.0) <= 1e-10;

  bool brute_ok = true;
  std::size_t checked = 0;
  const ModelConfig mc = ModelConfig::for_profile("desk");
  for (std::uint64_t seed : {1, 2, 3}) {
    FusionModel<float> model(mc, seed);
    for (const std::string split : {"train", "test"}) {
      const MetricsReport r = evaluate(model, load_inputs<float>(mc, m, m.split_records(split)), split);
      std::uint64_t correct = 0, pred_pos = 0, true_pos = 0, actual_pos = 0;
      for (const auto& p : r.predictions) {
        correct += p.label == p.predicted;
        pred_pos += p.predicted == kIntoxicated;
        actual_pos += p.label == kIntoxicated;
        true_pos += p.label == kIntoxicated && p.predicted == kIntoxicated;
      }
      const double n = static_cast<double>(r.predictions.size());
      brute_ok = brute_ok && r.metrics.accuracy == static_cast<double>(correct) / n;
      brute_ok = brute_ok && r.metrics.precision ==
                                 (pred_pos ? static_cast<double>(true_pos) / static_cast<double>(pred_pos) : 0.0);
      brute_ok = brute_ok && r.metrics.recall ==
                                 (actual_pos ? static_cast<double>(true_pos) / static_cast<double>(actual_pos) : 0.0);
      ++checked;
    }
  }
  return {worked && brute_ok, "worked example " + fmt("%.5f", w.accuracy) + " / " + fmt("%.5f", w.precision) + " / " +
                                  fmt("%.5f", w.recall) + ", brute-force agreement on " + std::to_string(checked) +
                                  " evaluations: " + (brute_ok ? "exact" : "MISMATCH")};
}

// 5 ------------------------------------------------------------------------------------

Outcome recurrent_oracle() {
  Rng rng(19);
  std::vector<TensorD> seq;
  std::vector<double> xs;
  for (int t = 0; t < 5; ++t) {
    xs.push_back(rng.uniform(-1.0, 1.0));
    seq.push_back(TensorD::from({1}, {xs.back()}));
  }
  auto lstm = LstmParams<double>::init(1, 1, rng);
  lstm.bias = random_tensor({4}, rng, -0.5, 0.5);
  const auto ls = lstm_forward(seq, lstm);
  double lstm_err = 0;
  {
    const auto wi = lstm.w_input.data(), wh = lstm.w_hidden.data(), b = lstm.bias.data();
    double h = 0, c = 0;
    for (int t = 0; t < 5; ++t) {
      const double i = sigmoid_ref(wi[0] * xs[t] + wh[0] * h + b[0]);
      const double f = sigmoid_ref(wi[1] * xs[t] + wh[1] * h + b[1]);
      const double g = std::tanh(wi[2] * xs[t] + wh[2] * h + b[2]);
      const double o = sigmoid_ref(wi[3] * xs[t] + wh[3] * h + b[3]);
      c = f * c + i * g;
      h = o * std::tanh(c);
      lstm_err = std::max(lstm_err, std::abs(ls[static_cast<std::size_t>(t)].item() - h));
    }
  }
  auto gru = GruParams<double>::init(1, 1, rng);
  gru.bias_input = random_tensor({3}, rng, -0.5, 0.5);
  gru.bias_hidden = random_tensor({3}, rng, -0.5, 0.5);
  const auto gs = gru_states(seq, gru);
  double gru_err = 0;
  {
    const auto wi = gru.w_input.data(), wh = gru.w_hidden.data();
    const auto bi = gru.bias_input.data(), bh = gru.bias_hidden.data();
    double h = 0;
    for (int t = 0; t < 5; ++t) {
      const double r = sigmoid_ref(wi[0] * xs[t] + bi[0] + wh[0] * h + bh[0]);
      const double z = sigmoid_ref(wi[1] * xs[t] + bi[1] + wh[1] * h + bh[1]);
      const double n = std::tanh(wi[2] * xs[t] + bi[2] + r * (wh[2] * h + bh[2]));
      h = (1 - z) * n + z * h;
      gru_err = std::max(gru_err, std::abs(gs[static_cast<std::size_t>(t)].item() - h));
    }
  }
  return {lstm_err <= 1e-10 && gru_err <= 1e-10,
          "LSTM max error " + fmt("%.2e", lstm_err) + ", GRU max error " + fmt("%.2e", gru_err) + " over 5 steps"};
}

// 6, 8, 9, 10 share the seed-42 desk run -----------------------------------------------

struct DeskRun {
  fs::path dir;
  double seconds = 0;
  MetricsReport test;
  std::string metrics_json;
};

DeskRun desk_run(const DatasetManifest& m, const fs::path& dir, FusionModel<float>& model) {
  const auto t0 = Clock::now();
  const TrainConfig tc;  // 25 epochs, seed 42
  const ValidationSplit split = validation_split(m, tc.val_fraction, tc.seed);
  const auto tr = load_inputs<float>(model.config(), m, split.train);
  const auto va = load_inputs<float>(model.config(), m, split.validation);
  TrainerState<float> state = fresh_trainer_state(model, tc);
  const TrainResult<float> result = train(model, tr, va, tc, state, TrainOptions{dir / "checkpoints", {}});
  DeskRun run;
  run.dir = dir;
  run.test = evaluate(model, load_inputs<float>(model.config(), m, m.split_records("test")), "test");
  run.test.history = result.history;
  run.metrics_json = report_json(run.test);
  write_text_file(dir / "metrics.json", run.metrics_json);
  run.seconds = seconds_since(t0);
  return run;
}

Outcome end_to_end(const DeskRun& run, double synth_seconds) {
  const double total = run.seconds + synth_seconds;
  const auto& c = run.test.confusion;
  return {run.test.metrics.accuracy >= 0.95 && run.test.history.train_loss.size() <= 25 && total <= 600,
          "test accuracy " + fmt("%.4f", run.test.metrics.accuracy) + " (" + std::to_string(c.tp + c.tn) + "/" +
              std::to_string(c.total()) + ") after " + std::to_string(run.test.history.train_loss.size()) +
              " epochs, precision " + fmt("%.4f", run.test.metrics.precision) + ", recall " +
              fmt("%.4f", run.test.metrics.recall) + ", " + fmt("%.1f", total) + " s"};
}

Outcome ablation_trend(const DatasetManifest& m) {
  const auto t0 = Clock::now();
  const std::vector<std::string> variants = {"fused_weighted", "landmarks_only", "visual_only"};
  std::vector<AblationRow> rows;
  std::vector<double> medians;
  std::string detail;
  for (const auto& v : variants) {
    std::vector<double> acc;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      rows.push_back(ablation_run<float>(v, ModelConfig::for_profile("desk"), TrainConfig{}, m, seed));
      acc.push_back(rows.back().metrics.accuracy);
    }
    medians.push_back(median(acc));
    detail += v + " median " + fmt("%.4f", medians.back()) + " [";
    for (std::size_t i = 0; i < acc.size(); ++i) detail += (i ? " " : "") + fmt("%.4f", acc[i]);
    detail += "], ";
  }
  std::printf("%s", ablation_table(rows).c_str());
  return {medians[0] >= medians[1] && medians[0] >= medians[2], detail + fmt("%.1f", seconds_since(t0)) + " s"};
}

Outcome determinism(const DeskRun& a, const DeskRun& b) {
  std::size_t files = 0;
  bool same = a.metrics_json == b.metrics_json;
  for (const auto& e : fs::directory_iterator(a.dir / "checkpoints")) {
    const fs::path other = b.dir / "checkpoints" / e.path().filename();
    same = same && fs::exists(other) && read_file(e.path()) == read_file(other);
    ++files;
  }
  return {same && files > 0, std::to_string(files) + " checkpoint files and metrics JSON " +
                                 (same ? "byte-identical" : "DIFFER")};
}

Outcome persistence(const DeskRun& run, const DatasetManifest& m) {
  const fs::path last = run.dir / "checkpoints" / "last.ckp";
  const CheckpointHeader h = read_checkpoint_header(last);
  FusionModel<float> restored(h.model, 777);
  TrainerState<float> state = fresh_trainer_state(restored, h.train);
  load_checkpoint(last, restored, state);
  const MetricsReport r = evaluate(restored, load_inputs<float>(h.model, m, m.split_records("test")), "test");
  bool identical = r.predictions.size() == run.test.predictions.size();
  for (std::size_t i = 0; identical && i < r.predictions.size(); ++i) {
    const auto& p = r.predictions[i];
    const auto& q = run.test.predictions[i];
    identical = p.sample_id == q.sample_id && p.predicted == q.predicted && p.logit_sober == q.logit_sober &&
                p.logit_intoxicated == q.logit_intoxicated && p.alpha == q.alpha;
  }
  auto bytes = read_file(last);
  bytes[bytes.size() / 3] ^= 0x04;
  const fs::path bad = run.dir / "corrupted.ckp";
  write_file(bad, bytes);
  bool detected = false;
  try {
    FusionModel<float> target(h.model, 1);
    TrainerState<float> s = fresh_trainer_state(target, h.train);
    load_checkpoint(bad, target, s);
  } catch (const ChecksumError&) {
    detected = true;
  }
  return {identical && detected, std::to_string(r.predictions.size()) + " reloaded predictions " +
                                     (identical ? "identical" : "DIFFER") + ", CRC corruption " +
                                     (detected ? "detected" : "NOT detected")};
}

Outcome interpretability(FusionModel<float>& model, const DatasetManifest& m) {
  const auto inputs = load_inputs<float>(model.config(), m, m.split_records("test"));
  double eyes = 0, nose = 0;
  std::size_t eyes_wins = 0;
  bool cam_ok = true;
  for (const auto& in : inputs) {
    const SaliencyReport s = landmark_saliency(model, in, in.label);
    eyes += s.region("eyes");
    nose += s.region("nose_bridge");
    eyes_wins += s.region("eyes") > s.region("nose_bridge");
    for (const auto& map : grad_cam3d(model, in, in.label)) {
      cam_ok = cam_ok && map.cam_shape == Shape{4, 8, 8} && map.cam.size() == 4 * 8 * 8;
      for (double v : map.cam) cam_ok = cam_ok && v >= 0.0 && std::isfinite(v);
    }
  }
  const double n = static_cast<double>(inputs.size());
  eyes /= n;
  nose /= n;
  return {eyes > nose && cam_ok, "mean eye saliency " + fmt("%.4f", eyes) + " vs nose bridge " + fmt("%.4f", nose) +
                                     " (eyes higher on " + std::to_string(eyes_wins) + "/" +
                                     std::to_string(inputs.size()) + " samples), Grad-CAM [4,8,8] nonnegative: " +
                                     (cam_ok ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "shotfuse_acceptance";
  fs::remove_all(work);
  int failures = 0;
  auto report = [&failures](int id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d %-26s %s  %s\n", id, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient oracle", gradient_oracle);
  report(2, "GAT invariants", gat_invariants);
  report(3, "fusion identities", fusion_identities);

  const auto t_synth = Clock::now();
  const DatasetManifest m = generate_dataset(GeneratorConfig{}, 42, work / "data");
  const double synth_seconds = seconds_since(t_synth);

  report(4, "metric identities", [&] { return metric_identities(m); });
  report(5, "recurrent-cell oracle", recurrent_oracle);

  const ModelConfig desk = ModelConfig::for_profile("desk");
  FusionModel<float> model(desk, 42), twin(desk, 42);
  DeskRun first, second;
  report(6, "end-to-end desk run", [&] {
    first = desk_run(m, work / "run_a", model);
    return end_to_end(first, synth_seconds);
  });
  report(7, "ablation median ordering", [&] { return ablation_trend(m); });
  report(8, "determinism", [&] {
    second = desk_run(m, work / "run_b", twin);
    return determinism(first, second);
  });
  report(9, "persistence", [&] { return persistence(first, m); });
  report(10, "interpretability sanity", [&] { return interpretability(model, m); });

  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAILED" : "PASSED", failures);
  return failures ? 1 : 0;
}
