#include <cmath>

#include "doctest.h"
#include "shotfuse/nn.hpp"
#include "test_support.hpp"

using namespace shotfuse;
using namespace shotfuse::testing;

TEST_CASE("linear: identity, constant, and gradients") {
  reset_tape<double>();
  Rng rng(3);
  LinearParams<double> p = LinearParams<double>::init(3, 3, rng);
  std::fill(p.weight.mutable_data().begin(), p.weight.mutable_data().end(), 0.0);
  for (std::size_t i = 0; i < 3; ++i) p.weight.mutable_data()[i * 3 + i] = 1.0;
  TensorD x = TensorD::from({3}, {1.5, -2.0, 0.25});
  TensorD y = linear(x, p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.data()[i] == x.data()[i]);

  std::fill(p.weight.mutable_data().begin(), p.weight.mutable_data().end(), 0.0);
  std::fill(p.bias.mutable_data().begin(), p.bias.mutable_data().end(), 0.7);
  TensorD constant = linear(x, p);
  for (double v : constant.data()) CHECK(v == 0.7);

  LinearParams<double> q = LinearParams<double>::init(4, 3, rng);
  q.bias = random_tensor({3}, rng);
  TensorD batch = random_tensor({5, 4}, rng);
  expect_gradients([&] { return weighted_sum(linear(batch, q)); },
                   {{"W", q.weight}, {"b", q.bias}, {"x", batch}});
  CHECK_THROWS_AS(linear(TensorD::zeros({2, 5}), q), DimensionError);
}

TEST_CASE("glorot init stays inside its bound") {
  Rng rng(4);
  LinearParams<double> p = LinearParams<double>::init(10, 6, rng);
  const double bound = std::sqrt(6.0 / 16.0);
  for (double v : p.weight.data()) CHECK(std::abs(v) <= bound);
  for (double v : p.bias.data()) CHECK(v == 0.0);
}

TEST_CASE("activations") {
  CHECK(activate(TensorD::scalar(-1.0), Activation::LeakyRelu, 0.01).item() == doctest::Approx(-0.01).epsilon(1e-15));
  CHECK(activate(TensorD::scalar(0.0), Activation::Sigmoid).item() == 0.5);
  CHECK(activate(TensorD::scalar(0.0), Activation::Swish).item() == 0.0);
  CHECK(activate(TensorD::scalar(-3.0), Activation::Relu).item() == 0.0);
  TensorD wide = TensorD::from({4}, {-800.0, -30.0, 30.0, 800.0});
  TensorD sw = sigmoid(wide);
  for (double v : sw.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  TensorD moderate = TensorD::from({3}, {-20.0, 0.3, 20.0});
  TensorD sm = sigmoid(moderate);
  for (double v : sm.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK_THROWS_AS(parse_activation("gelu"), ConfigError);
  CHECK(parse_activation("swish") == Activation::Swish);
}

TEST_CASE("softmax: uniform, stability, shift invariance, normalization") {
  TensorD u = softmax(TensorD::full({1, 4}, 3.0), 1);
  for (double v : u.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  TensorD s = softmax(TensorD::from({2}, {1000.0, 0.0}), 0);
  CHECK(s.data()[0] == doctest::Approx(1.0));
  CHECK(s.data()[1] < 1e-300);
  Rng rng(8);
  TensorD x = random_tensor({6, 5}, rng, -5, 5, false);
  TensorD y1 = softmax(x, 1);
  TensorD y2 = softmax(add_scalar(x, 123.456), 1);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y1.data()[i] - y2.data()[i]) < 1e-12);
  for (std::size_t r = 0; r < 6; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 5; ++c) total += y1.data()[r * 5 + c];
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("batchnorm: eval identity, train normalization, running stats, gradients") {
  reset_tape<double>();
  Rng rng(12);
  auto bn = BatchNormState<double>::init(4);
  TensorD x = random_tensor({3, 4}, rng, -2, 2, false);
  TensorD y = batchnorm(x, bn, Mode::Eval);
  const double scale = 1.0 / std::sqrt(1.0 + 1e-5);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(y.data()[i] - x.data()[i] * scale) < 1e-15);
  CHECK(std::abs(y.data()[0] - x.data()[0]) < 1e-5 * std::abs(x.data()[0]) + 1e-12);

  bn.gamma.mutable_data()[0] = 2.0;
  bn.beta.mutable_data()[0] = -0.5;
  TensorD big = random_tensor({64, 4}, rng, -3, 3, false);
  TensorD z = batchnorm(big, bn, Mode::Train);
  double m = 0, v = 0;
  for (std::size_t b = 0; b < 64; ++b) m += z.data()[b * 4];
  m /= 64;
  for (std::size_t b = 0; b < 64; ++b) v += (z.data()[b * 4] - m) * (z.data()[b * 4] - m);
  v /= 64;
  CHECK(std::abs(m - (-0.5)) < 1e-6);
  // Biased batch variance of gamma * xhat is gamma^2 * var / (var + eps).
  CHECK(std::abs(v - 4.0) < 1e-4);
  CHECK(bn.running_var[0] > 0.0);
  CHECK(bn.running_mean[0] != 0.0);

  CHECK_THROWS_AS(batchnorm(TensorD::zeros({1, 4}), bn, Mode::Train), ContractError);

  auto bn2 = BatchNormState<double>::init(4);
  bn2.gamma = random_tensor({4}, rng, 0.5, 1.5);
  bn2.beta = random_tensor({4}, rng);
  TensorD xb = random_tensor({2, 4}, rng);
  expect_gradients([&] { return weighted_sum(batchnorm(xb, bn2, Mode::Train)); },
                   {{"x", xb}, {"gamma", bn2.gamma}, {"beta", bn2.beta}});
  expect_gradients([&] { return weighted_sum(batchnorm(xb, bn2, Mode::Eval)); },
                   {{"x", xb}, {"gamma", bn2.gamma}, {"beta", bn2.beta}});
  TensorD vol = random_tensor({2, 3, 2, 2, 2}, rng);
  auto bn3 = BatchNormState<double>::init(3);
  expect_gradients([&] { return weighted_sum(batchnorm(vol, bn3, Mode::Train)); }, {{"x", vol}});
}

TEST_CASE("dropout") {
  Rng rng(21);
  TensorD x = TensorD::full({100000}, 1.0);
  TensorD same = dropout(x, 0.0, Mode::Train, rng);
  for (std::size_t i = 0; i < 100; ++i) CHECK(same.data()[i] == 1.0);
  TensorD ev = dropout(x, 0.9, Mode::Eval, rng);
  for (std::size_t i = 0; i < 100; ++i) CHECK(ev.data()[i] == 1.0);
  TensorD tr = dropout(x, 0.5, Mode::Train, rng);
  std::size_t survivors = 0;
  for (double v : tr.data()) {
    if (v != 0.0) {
      CHECK(v == 2.0);
      ++survivors;
    }
  }
  CHECK(std::abs(static_cast<double>(survivors) / 1e5 - 0.5) < 0.01);
  CHECK_THROWS_AS(dropout(x, 1.0, Mode::Train, rng), ContractError);
  CHECK_THROWS_AS(dropout(x, -0.1, Mode::Train, rng), ContractError);
}

TEST_CASE("conv3d: identity kernel, counting, shapes") {
  Rng rng(31);
  TensorD k = TensorD::from({1, 1, 1, 1, 1}, {1.0});
  CHECK_THROWS_AS(conv3d(TensorD::zeros({2, 3, 4, 5}), k, TensorD{}, {}), DimensionError);
  TensorD x1 = random_tensor({1, 3, 4, 5}, rng, -2, 2, false);
  for (ConvAlgo algo : {ConvAlgo::Direct, ConvAlgo::Im2col}) {
    TensorD y1 = conv3d(x1, k, TensorD{}, {}, algo);
    REQUIRE(y1.shape() == x1.shape());
    for (std::size_t i = 0; i < x1.numel(); ++i) CHECK(y1.data()[i] == x1.data()[i]);
    TensorD ones = TensorD::full({1, 2, 2, 2}, 1.0);
    TensorD kones = TensorD::full({1, 1, 2, 2, 2}, 1.0);
    TensorD eight = conv3d(ones, kones, TensorD{}, {}, algo);
    REQUIRE(eight.numel() == 1);
    CHECK(eight.data()[0] == 8.0);
  }
  CHECK(conv_out_extent(8, 3, 2, 1) == 4);
  CHECK(conv_out_extent(32, 7, 2, 3) == 16);
  CHECK_THROWS_AS(conv_out_extent(2, 5, 1, 1), DimensionError);
}

TEST_CASE("conv3d direct and im2col paths agree within 1e-10") {
  Rng rng(41);
  TensorD x = random_tensor({2, 3, 5, 9, 8}, rng);
  TensorD k = random_tensor({4, 3, 3, 3, 2}, rng);
  TensorD b = random_tensor({4}, rng);
  const Conv3dGeometry geom{{2, 1, 2}, {1, 2, 0}};
  reset_tape<double>();
  TensorD yd = conv3d(x, k, b, geom, ConvAlgo::Direct);
  TensorD yi = conv3d(x, k, b, geom, ConvAlgo::Im2col);
  REQUIRE(yd.shape() == yi.shape());
  for (std::size_t i = 0; i < yd.numel(); ++i) CHECK(std::abs(yd.data()[i] - yi.data()[i]) < 1e-10);
  backward(add(weighted_sum(yd), weighted_sum(yi)));
  reset_tape<double>();
}

TEST_CASE("conv3d gradients wrt input, kernel, and bias match finite differences") {
  Rng rng(42);
  TensorD x = random_tensor({1, 2, 4, 4, 4}, rng);
  TensorD k = random_tensor({3, 2, 3, 3, 3}, rng);
  TensorD b = random_tensor({3}, rng);
  for (ConvAlgo algo : {ConvAlgo::Direct, ConvAlgo::Im2col}) {
    expect_gradients([&] { return weighted_sum(conv3d(x, k, b, {{1, 1, 1}, {1, 1, 1}}, algo)); },
                     {{"x", x}, {"k", k}, {"b", b}});
    expect_gradients([&] { return weighted_sum(conv3d(x, k, TensorD{}, {{2, 2, 2}, {1, 1, 1}}, algo)); },
                     {{"x", x}, {"k", k}});
  }
}

TEST_CASE("adaptive average pooling") {
  Rng rng(51);
  TensorD x = random_tensor({2, 5, 4, 3}, rng, -2, 2, false);
  TensorD same = adaptive_avg_pool3d(x, {5, 4, 3});
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(std::abs(same.data()[i] - x.data()[i]) < 1e-15);

  TensorD global = adaptive_avg_pool3d(x, {1, 1, 1});
  REQUIRE(global.shape() == Shape{2, 1, 1, 1});
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0;
    for (std::size_t i = 0; i < 60; ++i) s += x.data()[c * 60 + i];
    CHECK(std::abs(global.data()[c] - s / 60.0) < 1e-12);
  }

  // T=5 -> 2 bins: [0,3) and [2,5); brute-force averages.
  TensorD line = TensorD::from({1, 5, 1, 1}, {1.0, 2.0, 4.0, 8.0, 16.0});
  TensorD pooled = adaptive_avg_pool3d(line, {2, 1, 1});
  CHECK(pooled.data()[0] == doctest::Approx((1.0 + 2.0 + 4.0) / 3.0).epsilon(1e-15));
  CHECK(pooled.data()[1] == doctest::Approx((4.0 + 8.0 + 16.0) / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(adaptive_avg_pool3d(x, {0, 1, 1}), ContractError);
  TensorD xg = random_tensor({1, 2, 5, 4, 3}, rng);
  expect_gradients([&] { return weighted_sum(adaptive_avg_pool3d(xg, {2, 3, 2})); }, {{"x", xg}});
}

TEST_CASE("mean_pool") {
  reset_tape<double>();
  TensorD v = TensorD::from({3}, {1.0, -2.0, 0.5}, true);
  CHECK(mean_pool<double>({v}).data()[1] == -2.0);
  TensorD negv = neg(v);
  TensorD cancelled = mean_pool<double>({v, negv});
  for (double x : cancelled.data()) CHECK(x == 0.0);
  CHECK_THROWS_AS(mean_pool<double>({}), ContractError);
  Rng rng(61);
  TensorD a = random_tensor({4}, rng), b = random_tensor({4}, rng), c = random_tensor({4}, rng);
  reset_tape<double>();
  backward(sum(mean_pool<double>({a, b, c})));
  for (double g : b.grad()) CHECK(g == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  reset_tape<double>();
  expect_gradients([&] { return weighted_sum(mean_pool<double>({a, b, c})); }, {{"a", a}, {"b", b}, {"c", c}});
}
