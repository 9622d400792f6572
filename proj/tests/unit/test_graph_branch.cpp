#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "shotfuse/graph_branch.hpp"
#include "test_support.hpp"

using namespace shotfuse;
using namespace shotfuse::testing;

namespace {

LandmarkFrame random_face(Rng& rng) {
  LandmarkFrame f;
  for (auto& p : f.coords) p = {rng.uniform(100.0, 200.0), rng.uniform(100.0, 200.0)};
  for (std::size_t k = 36; k < 42; ++k) f.coords[k].x -= 40.0;
  for (std::size_t k = 42; k < 48; ++k) f.coords[k].x += 40.0;
  return f;
}

LandmarkShot random_shot(Rng& rng, std::size_t frames) {
  LandmarkShot s;
  s.shot_id = "s";
  for (std::size_t i = 0; i < frames; ++i) s.frames.push_back(random_face(rng));
  return s;
}

double sigmoid_ref(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("facial graph structure") {
  const FacialGraph g = build_facial_graph();
  CHECK(g.node_count == 68);
  CHECK(g.connected());
  for (std::size_t u = 0; u < 68; ++u) {
    CHECK(g.has_edge(u, u));
    CHECK(g.neighbors[u].size() >= 2);
    for (std::size_t v : g.neighbors[u]) CHECK(g.has_edge(v, u));
  }
  CHECK(g.neighbors[0] == std::vector<std::size_t>{0, 1});
  CHECK(g.has_edge(41, 36));
  CHECK(g.has_edge(59, 48));
  CHECK(g.has_edge(67, 60));
  CHECK(g.has_edge(27, 21));
  CHECK_FALSE(g.has_edge(16, 17));
  CHECK_FALSE(g.has_edge(0, 68));

  const FacialGraph split = FacialGraph::from_edges(4, {{0, 1}, {2, 3}});
  CHECK_FALSE(split.connected());
  CHECK_THROWS_AS(FacialGraph::from_edges(3, {{0, 3}}), ContractError);
}

TEST_CASE("landmark normalization invariances") {
  Rng rng(11);
  const LandmarkFrame f = random_face(rng);
  const LandmarkFrame n = normalize_landmarks(f);
  double cx = 0, cy = 0, rx = 0, ry = 0, lx = 0, ly = 0;
  for (const auto& p : n.coords) {
    cx += p.x;
    cy += p.y;
  }
  for (std::size_t k = 0; k < 6; ++k) {
    rx += n.coords[36 + k].x;
    ry += n.coords[36 + k].y;
    lx += n.coords[42 + k].x;
    ly += n.coords[42 + k].y;
  }
  CHECK(std::abs(cx / 68) < 1e-12);
  CHECK(std::abs(cy / 68) < 1e-12);
  CHECK(std::hypot(rx / 6 - lx / 6, ry / 6 - ly / 6) == doctest::Approx(1.0).epsilon(1e-12));

  // a similarity transform of the input only rotates the output
  LandmarkFrame moved = f;
  const double s = 3.7, c = std::cos(0.4), sn = std::sin(0.4), tx = -51.0, ty = 12.5;
  for (auto& p : moved.coords) p = {s * (c * p.x - sn * p.y) + tx, s * (sn * p.x + c * p.y) + ty};
  const LandmarkFrame nm = normalize_landmarks(moved);
  for (std::size_t k = 0; k < 68; ++k) {
    CHECK(std::abs(nm.coords[k].x - (c * n.coords[k].x - sn * n.coords[k].y)) < 1e-12);
    CHECK(std::abs(nm.coords[k].y - (sn * n.coords[k].x + c * n.coords[k].y)) < 1e-12);
  }
  const LandmarkFrame twice = normalize_landmarks(n);
  for (std::size_t k = 0; k < 68; ++k) {
    CHECK(std::abs(twice.coords[k].x - n.coords[k].x) < 1e-12);
    CHECK(std::abs(twice.coords[k].y - n.coords[k].y) < 1e-12);
  }
}

TEST_CASE("landmark normalization degenerate cases") {
  LandmarkFrame same;
  for (auto& p : same.coords) p = {4.0, 4.0};
  CHECK_THROWS_AS(normalize_landmarks(same), GeometryError);

  // coincident eye centers fall back to the bounding-box diagonal
  LandmarkFrame f;
  for (std::size_t k = 0; k < 68; ++k) f.coords[k] = {static_cast<double>(k % 4), static_cast<double>(k % 3)};
  for (std::size_t k = 36; k < 48; ++k) f.coords[k] = {1.0, 1.0};
  const LandmarkFrame n = normalize_landmarks(f);
  // raw box is [0,3] x [0,2]
  CHECK(n.coords[3].x - n.coords[0].x == doctest::Approx(3.0 / std::hypot(3.0, 2.0)).epsilon(1e-12));
  CHECK(n.coords[2].y - n.coords[0].y == doctest::Approx(2.0 / std::hypot(3.0, 2.0)).epsilon(1e-12));

  LandmarkFrame invalid;
  invalid.valid = false;
  CHECK_THROWS_AS(normalize_landmarks(invalid), ContractError);
}

TEST_CASE("eye and mouth aspect ratios") {
  LandmarkFrame f;
  const double angles[] = {180.0, 120.0, 60.0, 0.0, -60.0, -120.0};
  for (std::size_t k = 0; k < 6; ++k) {
    const double a = angles[k] * M_PI / 180.0;
    f.coords[36 + k] = {std::cos(a), std::sin(a)};
    f.coords[42 + k] = {5.0 + 2.0 * std::cos(a), 2.0 * std::sin(a)};
  }
  CHECK(compute_ear(f, Eye::Right) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
  CHECK(compute_ear(f, Eye::Left) == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));

  // closing the eye vertically scales the ratio linearly
  LandmarkFrame squashed = f;
  for (std::size_t k = 36; k < 42; ++k) squashed.coords[k].y *= 0.25;
  CHECK(compute_ear(squashed, Eye::Right) == doctest::Approx(0.25 * std::sqrt(3.0) / 2.0).epsilon(1e-12));

  f.coords[48] = {0.0, 0.0};
  f.coords[54] = {4.0, 0.0};
  f.coords[50] = {1.0, 1.0};
  f.coords[58] = {1.0, -1.0};
  f.coords[52] = {3.0, 0.5};
  f.coords[56] = {3.0, -0.5};
  CHECK(compute_mar(f) == doctest::Approx(3.0 / 8.0).epsilon(1e-12));

  f.coords[39] = f.coords[36];
  CHECK_THROWS_AS(compute_ear(f, Eye::Right), GeometryError);
  f.coords[54] = f.coords[48];
  CHECK_THROWS_AS(compute_mar(f), GeometryError);
}

TEST_CASE("normalize_frames matches the value path and has exact gradients") {
  reset_tape<double>();
  Rng rng(12);
  const LandmarkShot shot = random_shot(rng, 3);
  TensorD raw = shot_coordinates<double>(shot, true);
  TensorD norm = normalize_frames(raw);
  for (std::size_t f = 0; f < 3; ++f) {
    const LandmarkFrame ref = normalize_landmarks(shot.frames[f]);
    for (std::size_t k = 0; k < 68; ++k) {
      CHECK(norm.data()[f * 136 + 2 * k] == doctest::Approx(ref.coords[k].x).epsilon(1e-14));
      CHECK(norm.data()[f * 136 + 2 * k + 1] == doctest::Approx(ref.coords[k].y).epsilon(1e-14));
    }
  }
  reset_tape<double>();
  expect_gradients([&] { return weighted_sum(normalize_frames(raw)); }, {{"coords", raw}});
  CHECK_THROWS_AS(normalize_frames(TensorD::zeros({2, 67, 2})), DimensionError);
  CHECK_THROWS_AS(shot_coordinates<double>(LandmarkShot{}), ContractError);
}

TEST_CASE("node features carry scaled frame differences") {
  Rng rng(13);
  TensorD y = random_tensor({3, 68, 2}, rng, -1.0, 1.0, false);
  TensorD feats = node_features(y, true, 10.0);
  CHECK(feats.shape() == Shape{3, 68, 4});
  for (std::size_t k = 0; k < 68; ++k) {
    CHECK(feats.data()[k * 4 + 2] == 0.0);
    CHECK(feats.data()[k * 4 + 3] == 0.0);
    const double expected = 10.0 * (y.data()[2 * 136 + 2 * k] - y.data()[136 + 2 * k]);
    CHECK(feats.data()[2 * 272 + k * 4 + 2] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(feats.data()[2 * 272 + k * 4] == y.data()[2 * 136 + 2 * k]);
  }
  TensorD single = random_tensor({1, 68, 2}, rng, -1.0, 1.0, false);
  TensorD single_feats = node_features(single, true, 10.0);
  CHECK(single_feats.shape() == Shape{1, 68, 4});
  TensorD plain = node_features(y, false, 10.0);
  CHECK(plain.shape() == Shape{3, 68, 2});
}

TEST_CASE("graph attention rows are distributions") {
  reset_tape<double>();
  Rng rng(14);
  const FacialGraph g = build_facial_graph();
  GatParams<double> p = GatParams<double>::init(4, 8, 2, rng);
  TensorD x = random_tensor({2, 68, 4}, rng);
  std::vector<double> alpha;
  TensorD h = gat_layer(x, g, p, GatOptions{}, &alpha);
  CHECK(h.shape() == Shape{2, 68, 8});
  std::size_t per_head = 0;
  for (const auto& nb : g.neighbors) per_head += nb.size();
  REQUIRE(alpha.size() == 2 * 2 * per_head);
  std::size_t offset = 0;
  for (std::size_t fh = 0; fh < 4; ++fh)
    for (std::size_t i = 0; i < 68; ++i) {
      double total = 0;
      for (std::size_t q = 0; q < g.neighbors[i].size(); ++q) {
        CHECK(alpha[offset + q] > 0.0);
        total += alpha[offset + q];
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
      offset += g.neighbors[i].size();
    }
  CHECK_THROWS_AS(GatParams<double>::init(4, 7, 2, rng), ConfigError);
  CHECK_THROWS_AS(gat_layer(TensorD::zeros({2, 67, 4}), g, p, GatOptions{}), DimensionError);
  CHECK_THROWS_AS(gat_layer(TensorD::zeros({68, 3}), g, p, GatOptions{}), DimensionError);
}

TEST_CASE("graph attention with zero attention vector averages neighbors") {
  Rng rng(15);
  const FacialGraph g = FacialGraph::from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  GatParams<double> p = GatParams<double>::init(2, 2, 1, rng);
  std::fill(p.attention.mutable_data().begin(), p.attention.mutable_data().end(), 0.0);
  std::vector<double> eye = {1, 0, 0, 1};
  std::copy(eye.begin(), eye.end(), p.weight.mutable_data().begin());
  TensorD x = TensorD::from({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  GatOptions opts;
  opts.activation = Activation::Relu;
  TensorD h = gat_layer(x, g, p, opts);
  const double expected0[] = {2.0, 3.0};     // mean of nodes 0, 1
  const double expected1[] = {3.0, 4.0};     // mean of nodes 0, 1, 2
  for (int d = 0; d < 2; ++d) {
    CHECK(h.data()[d] == doctest::Approx(expected0[d]).epsilon(1e-14));
    CHECK(h.data()[2 + d] == doctest::Approx(expected1[d]).epsilon(1e-14));
  }
}

TEST_CASE("graph attention is permutation equivariant") {
  Rng rng(16);
  const std::vector<std::pair<std::size_t, std::size_t>> edges = {
      {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {2, 6}};
  const std::vector<std::size_t> perm = {3, 7, 0, 5, 1, 6, 2, 4};  // node i -> perm[i]
  std::vector<std::pair<std::size_t, std::size_t>> permuted;
  for (auto [u, v] : edges) permuted.emplace_back(perm[u], perm[v]);
  const FacialGraph g = FacialGraph::from_edges(8, edges);
  const FacialGraph gp = FacialGraph::from_edges(8, permuted);
  GatParams<double> p = GatParams<double>::init(3, 6, 2, rng);
  TensorD x = random_tensor({8, 3}, rng, -1.0, 1.0, false);
  std::vector<double> xp(24);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t d = 0; d < 3; ++d) xp[perm[i] * 3 + d] = x.data()[i * 3 + d];
  TensorD h = gat_layer(x, g, p, GatOptions{});
  TensorD hp = gat_layer(TensorD::from({8, 3}, xp), gp, p, GatOptions{});
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t d = 0; d < 6; ++d) CHECK(std::abs(hp.data()[perm[i] * 6 + d] - h.data()[i * 6 + d]) < 1e-10);
}

TEST_CASE("graph attention and frame embedding gradients") {
  reset_tape<double>();
  Rng rng(17);
  const FacialGraph g = build_facial_graph();
  std::vector<GatParams<double>> layers = {GatParams<double>::init(4, 6, 2, rng),
                                           GatParams<double>::init(6, 4, 2, rng)};
  TensorD x = random_tensor({2, 68, 4}, rng, -1.0, 1.0);
  GatOptions opts;
  expect_gradients([&] { return weighted_sum(gat_layer(x, g, layers[0], opts)); },
                   {{"W", layers[0].weight}, {"a", layers[0].attention}, {"x", x}});
  opts.activation = Activation::Swish;
  expect_gradients([&] { return weighted_sum(frame_embed(x, g, layers, opts)); },
                   {{"W0", layers[0].weight}, {"a0", layers[0].attention}, {"W1", layers[1].weight},
                    {"a1", layers[1].attention}, {"x", x}});
  TensorD emb = frame_embed(x, g, layers, opts);
  CHECK(emb.shape() == Shape{2, 4});
  CHECK_THROWS_AS(frame_embed(x, g, std::vector<GatParams<double>>{}, opts), ConfigError);
}

TEST_CASE("landmark pathway gradients reach raw coordinates") {
  reset_tape<double>();
  Rng rng(18);
  const FacialGraph g = build_facial_graph();
  std::vector<GatParams<double>> layers = {GatParams<double>::init(4, 4, 2, rng)};
  TensorD raw = shot_coordinates<double>(random_shot(rng, 3), true);
  expect_gradients(
      [&] {
        TensorD feats = node_features(normalize_frames(raw), true, 10.0);
        return weighted_sum(shot_pool<double>({frame_embed(feats, g, layers, GatOptions{})}));
      },
      {{"coords", raw}});
}

TEST_CASE("shot pooling averages frames") {
  TensorD a = TensorD::from({2}, {1.0, 2.0});
  TensorD b = TensorD::from({2}, {3.0, 6.0});
  TensorD m = shot_pool<double>({a, b});
  CHECK(m.data()[0] == 2.0);
  CHECK(m.data()[1] == 4.0);
}

TEST_CASE("LSTM matches a scalar recurrence") {
  reset_tape<double>();
  Rng rng(19);
  LstmParams<double> p = LstmParams<double>::init(1, 1, rng);
  p.bias = random_tensor({4}, rng, -0.5, 0.5);
  std::vector<TensorD> seq;
  std::vector<double> xs;
  for (int t = 0; t < 5; ++t) {
    xs.push_back(rng.uniform(-1.0, 1.0));
    seq.push_back(TensorD::from({1}, {xs.back()}));
  }
  const auto states = lstm_forward(seq, p);
  const auto wi = p.w_input.data(), wh = p.w_hidden.data(), b = p.bias.data();
  double h = 0, c = 0;
  for (int t = 0; t < 5; ++t) {
    const double i = sigmoid_ref(wi[0] * xs[t] + wh[0] * h + b[0]);
    const double f = sigmoid_ref(wi[1] * xs[t] + wh[1] * h + b[1]);
    const double g = std::tanh(wi[2] * xs[t] + wh[2] * h + b[2]);
    const double o = sigmoid_ref(wi[3] * xs[t] + wh[3] * h + b[3]);
    c = f * c + i * g;
    h = o * std::tanh(c);
    CHECK(std::abs(states[t].item() - h) < 1e-10);
  }

  LstmParams<double> zero = LstmParams<double>::init(3, 2, rng);
  std::fill(zero.w_input.mutable_data().begin(), zero.w_input.mutable_data().end(), 0.0);
  std::fill(zero.w_hidden.mutable_data().begin(), zero.w_hidden.mutable_data().end(), 0.0);
  const auto zs = lstm_forward<double>({random_tensor({3}, rng)}, zero);
  for (double v : zs[0].data()) CHECK(v == 0.0);

  LstmParams<double> q = LstmParams<double>::init(3, 2, rng);
  std::vector<TensorD> xseq = {random_tensor({3}, rng), random_tensor({3}, rng), random_tensor({3}, rng)};
  reset_tape<double>();
  expect_gradients([&] { return weighted_sum(lstm_forward(xseq, q).back()); },
                   {{"Wx", q.w_input}, {"Wh", q.w_hidden}, {"b", q.bias}, {"x0", xseq[0]}});
  CHECK_THROWS_AS(lstm_forward<double>({}, q), ContractError);
}

TEST_CASE("GRU matches a scalar recurrence") {
  reset_tape<double>();
  Rng rng(20);
  GruParams<double> p = GruParams<double>::init(1, 1, rng);
  p.bias_input = random_tensor({3}, rng, -0.5, 0.5);
  p.bias_hidden = random_tensor({3}, rng, -0.5, 0.5);
  std::vector<TensorD> seq;
  std::vector<double> xs;
  for (int t = 0; t < 5; ++t) {
    xs.push_back(rng.uniform(-1.0, 1.0));
    seq.push_back(TensorD::from({1}, {xs.back()}));
  }
  const auto states = gru_states(seq, p);
  const auto wi = p.w_input.data(), wh = p.w_hidden.data(), bi = p.bias_input.data(), bh = p.bias_hidden.data();
  double h = 0;
  for (int t = 0; t < 5; ++t) {
    const double r = sigmoid_ref(wi[0] * xs[t] + bi[0] + wh[0] * h + bh[0]);
    const double z = sigmoid_ref(wi[1] * xs[t] + bi[1] + wh[1] * h + bh[1]);
    const double n = std::tanh(wi[2] * xs[t] + bi[2] + r * (wh[2] * h + bh[2]));
    h = (1 - z) * n + z * h;
    CHECK(std::abs(states[t].item() - h) < 1e-10);
  }
  CHECK(gru_forward(seq, p).item() == states.back().item());

  // an update gate pinned at 1 keeps the zero initial state
  GruParams<double> hold = GruParams<double>::init(2, 2, rng);
  std::fill(hold.bias_input.mutable_data().begin() + 2, hold.bias_input.mutable_data().begin() + 4, 1e3);
  const auto held = gru_states<double>({random_tensor({2}, rng, -1, 1, false), random_tensor({2}, rng, -1, 1, false)}, hold);
  for (const auto& s : held)
    for (double v : s.data()) CHECK(std::abs(v) < 1e-12);

  GruParams<double> q = GruParams<double>::init(3, 2, rng);
  std::vector<TensorD> xseq = {random_tensor({3}, rng), random_tensor({3}, rng)};
  reset_tape<double>();
  expect_gradients([&] { return weighted_sum(gru_forward(xseq, q)); },
                   {{"Wx", q.w_input}, {"Wh", q.w_hidden}, {"bx", q.bias_input}, {"bh", q.bias_hidden}, {"x1", xseq[1]}});
}
