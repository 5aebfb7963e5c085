// Copyright 2026 The htrner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <string>
#include <vector>

#include "htrner/ctc.hpp"
#include "htrner/error.hpp"
#include "htrner/image.hpp"
#include "htrner/net.hpp"
#include "htrner/rng.hpp"

using namespace htrner;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.input_height = 8;
  c.conv_blocks = {{2, 3, 3, 2, 2}};
  c.lstm_layers = 1;
  c.lstm_hidden = 4;
  c.num_classes = 5;
  return c;
}

GrayImage random_image(Rng& rng, int h, int w) {
  GrayImage img(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) img.at(r, c) = rng.uniform();
  return img;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("reference architecture") {
  auto c = NetworkConfig::reference(80);
  CHECK(c.input_height == 64);
  REQUIRE(c.conv_blocks.size() == 4);
  CHECK(c.conv_blocks[0].filters == 16);
  CHECK(c.conv_blocks[3].filters == 64);
  CHECK(c.lstm_layers == 3);
  CHECK(c.lstm_hidden == 256);
  CHECK(c.num_classes == 80);
  validate_config(c);
  // Heights: 64 -> 4 across four (2,x) pools; widths halve twice.
  CHECK(frame_dim(c) == 64 * 4);
  CHECK(frame_count(c, 100) == 25);
  CHECK(frame_count(c, 103) == 25);  // floor at each stage
}

TEST_CASE("config validation") {
  auto c = tiny_config();
  validate_config(c);
  SUBCASE("even kernel") {
    c.conv_blocks[0].kernel_w = 4;
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  }
  SUBCASE("pool height must divide input height") {
    c.conv_blocks = {{2, 3, 3, 3, 1}};  // 8 % 3 != 0
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  }
  SUBCASE("no conv blocks") {
    c.conv_blocks.clear();
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  }
  SUBCASE("single digit block count keeps names sortable") {
    c.input_height = 1024;
    c.conv_blocks.assign(10, {2, 3, 3, 2, 1});
    CHECK_THROWS_AS(validate_config(c), ConfigError);
  }
  SUBCASE("too narrow an image cannot be framed") {
    auto r = NetworkConfig::reference(5);
    CHECK_THROWS_AS(frame_count(r, 3), DataError);
  }
}

TEST_CASE("parameter store layout") {
  auto c = tiny_config();
  Rng rng(1);
  auto params = init_params(c, rng);

  std::vector<std::string> names;
  for (const auto& [k, v] : params) names.push_back(k);
  CHECK(names == std::vector<std::string>{
                     "bn0.running_mean", "bn0.running_var", "bn0.scale",
                     "bn0.shift", "conv0.bias", "conv0.weight",
                     "lstm0.bwd.bias", "lstm0.bwd.w_hh", "lstm0.bwd.w_ih",
                     "lstm0.fwd.bias", "lstm0.fwd.w_hh", "lstm0.fwd.w_ih",
                     "out.bias", "out.weight"});

  CHECK(params.at("conv0.weight").rows() == 2);
  CHECK(params.at("conv0.weight").cols() == 9);  // 1 in-channel, 3x3
  const int D = frame_dim(c);  // 2 filters * 4 rows
  CHECK(D == 8);
  CHECK(params.at("lstm0.fwd.w_ih").rows() == 16);  // 4H
  CHECK(params.at("lstm0.fwd.w_ih").cols() == D);
  CHECK(params.at("lstm0.fwd.w_hh").cols() == 4);
  CHECK(params.at("out.weight").rows() == 5);
  CHECK(params.at("out.weight").cols() == 8);  // 2H

  SUBCASE("batch norm starts as identity") {
    CHECK(params.at("bn0.scale").isOnes());
    CHECK(params.at("bn0.shift").isZero());
    CHECK(params.at("bn0.running_mean").isZero());
    CHECK(params.at("bn0.running_var").isOnes());
  }
  SUBCASE("forget gate bias starts at one") {
    const auto& b = params.at("lstm0.fwd.bias");
    for (int i = 0; i < 4; ++i) {
      CHECK(b(i, 0) == 0.0);           // input gate
      CHECK(b(4 + i, 0) == 1.0);       // forget gate
      CHECK(b(8 + i, 0) == 0.0);       // cell candidate
      CHECK(b(12 + i, 0) == 0.0);      // output gate
    }
  }
  SUBCASE("closed-form counts match the store") {
    std::size_t total = 0, trainable = 0;
    for (const auto& [k, v] : params) {
      total += static_cast<std::size_t>(v.size());
      if (is_trainable(k)) trainable += static_cast<std::size_t>(v.size());
    }
    CHECK(param_count(c) == total);
    CHECK(trainable_param_count(c) == trainable);
    CHECK(trainable < total);
  }
  SUBCASE("same seed, same weights") {
    Rng r2(1);
    auto p2 = init_params(c, r2);
    for (const auto& [k, v] : params) CHECK(v == p2.at(k));
  }
  SUBCASE("glorot bound on conv weights") {
    // fan_in = 1*3*3, fan_out = 2*3*3.
    const double bound = std::sqrt(6.0 / (9 + 18));
    const auto& w = params.at("conv0.weight");
    CHECK(w.cwiseAbs().maxCoeff() <= bound);
    CHECK(w.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("leaky relu") {
  CHECK(leaky_relu(2.0, 0.01, 0.0) == 2.0);
  CHECK(leaky_relu(-3.0, 0.01, 0.0) == doctest::Approx(-0.03));
  CHECK(leaky_relu(0.0, 0.01, 0.0) == 0.0);
  // The threshold gates which side applies; the leak still scales raw x.
  CHECK(leaky_relu(2.0, 0.1, 1.0) == 2.0);
  CHECK(leaky_relu(0.5, 0.1, 1.0) == doctest::Approx(0.05));
}

TEST_CASE("forward output is a log distribution per frame") {
  auto c = tiny_config();
  Rng rng(7);
  auto params = init_params(c, rng);
  auto img = random_image(rng, 8, 16);
  auto out = net_forward(img, params, c, NetMode::eval, false);
  CHECK(out.log_probs.rows() == frame_count(c, 16));
  CHECK(out.log_probs.cols() == 5);
  for (int t = 0; t < out.log_probs.rows(); ++t) {
    double s = out.log_probs.row(t).array().exp().sum();
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("deterministic") {
    auto again = net_forward(img, params, c, NetMode::eval, false);
    CHECK(out.log_probs == again.log_probs);
  }
  SUBCASE("eval mode produces no stats and train mode does") {
    CHECK(out.stats.blocks.empty());
    auto tr = net_forward(img, params, c, NetMode::train, false);
    REQUIRE(tr.stats.blocks.size() == 1);
    CHECK(tr.stats.blocks[0].mean.size() == 2);
  }
}

TEST_CASE("train-mode batch norm standardizes each channel") {
  auto c = tiny_config();
  Rng rng(3);
  auto params = init_params(c, rng);
  auto img = random_image(rng, 8, 20);
  auto out = net_forward(img, params, c, NetMode::train, true);
  REQUIRE(out.cache != nullptr);
  const auto& xhat = out.cache->conv[0].xhat;
  for (int f = 0; f < xhat.rows(); ++f) {
    double mean = xhat.row(f).mean();
    double var = xhat.row(f).array().square().mean() - mean * mean;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
    // Biased variance, shrunk slightly by epsilon.
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("forward never mutates the parameter store") {
  auto c = tiny_config();
  Rng rng(11);
  auto params = init_params(c, rng);
  auto before = params;
  auto img = random_image(rng, 8, 12);
  (void)net_forward(img, params, c, NetMode::train, false);
  for (const auto& [k, v] : before) CHECK(v == params.at(k));
}

TEST_CASE("apply_running_stats folds with momentum") {
  auto c = tiny_config();
  c.bn_momentum = 0.9;
  Rng rng(5);
  auto params = init_params(c, rng);
  RunningStatsDelta delta;
  delta.blocks.resize(1);
  delta.blocks[0].mean = Eigen::VectorXd::Constant(2, 2.0);
  delta.blocks[0].var = Eigen::VectorXd::Constant(2, 4.0);
  apply_running_stats(params, delta, c);
  CHECK(params.at("bn0.running_mean")(0, 0) ==
        doctest::Approx(0.9 * 0.0 + 0.1 * 2.0));
  CHECK(params.at("bn0.running_var")(0, 0) ==
        doctest::Approx(0.9 * 1.0 + 0.1 * 4.0));
}

// A 1x1-conv single-hidden-unit network, small enough to run the LSTM
// equations
// by hand. Pins the gate order (input, forget, cell, output), the recurrence
// and the direction handling; a finite-difference check alone would accept
// any self-consistent permutation.
TEST_CASE("hand-computed forward on a unit network") {
  NetworkConfig c;
  c.input_height = 1;
  c.conv_blocks = {{1, 1, 1, 1, 1}};
  c.lstm_layers = 1;
  c.lstm_hidden = 1;
  c.num_classes = 2;
  validate_config(c);

  Rng rng(1);
  auto params = init_params(c, rng);
  params.at("conv0.weight")(0, 0) = 2.0;
  params.at("conv0.bias")(0, 0) = 0.1;
  Eigen::MatrixXd w_ih(4, 1), w_hh(4, 1), bias(4, 1);
  w_ih << 0.5, 0.4, 0.3, 0.2;  // i, f, g, o
  w_hh << 0.1, 0.1, 0.1, 0.1;
  bias << 0.05, 0.15, 0.25, 0.35;
  params.at("lstm0.fwd.w_ih") = w_ih;
  params.at("lstm0.fwd.w_hh") = w_hh;
  params.at("lstm0.fwd.bias") = bias;
  params.at("lstm0.bwd.w_ih") = w_ih;
  params.at("lstm0.bwd.w_hh") = w_hh;
  params.at("lstm0.bwd.bias") = bias;
  params.at("out.bias").setZero();

  GrayImage img(1, 2);
  img.at(0, 0) = 0.3;
  img.at(0, 1) = 0.7;

  // Eval-mode batch norm with identity running stats only rescales by
  // 1/sqrt(1 + eps).
  const double k = 1.0 / std::sqrt(1.0 + c.bn_epsilon);
  const double x0 = (2.0 * 0.3 + 0.1) * k;
  const double x1 = (2.0 * 0.7 + 0.1) * k;

  auto step = [&](double x, double h_prev, double c_prev, double* c_out) {
    const double i = sigmoid(0.5 * x + 0.1 * h_prev + 0.05);
    const double f = sigmoid(0.4 * x + 0.1 * h_prev + 0.15);
    const double g = std::tanh(0.3 * x + 0.1 * h_prev + 0.25);
    const double o = sigmoid(0.2 * x + 0.1 * h_prev + 0.35);
    const double cc = f * c_prev + i * g;
    *c_out = cc;
    return o * std::tanh(cc);
  };
  double c_state = 0.0;
  const double hf0 = step(x0, 0.0, 0.0, &c_state);
  const double hf1 = step(x1, hf0, c_state, &c_state);
  c_state = 0.0;
  const double hb_at_1 = step(x1, 0.0, 0.0, &c_state);   // first reverse step
  const double hb_at_0 = step(x0, hb_at_1, c_state, &c_state);

  auto logit_pair = [&](double v) {
    // Scores (v, 0) under log-softmax.
    const double lse = std::log(std::exp(v) + 1.0);
    return std::pair<double, double>(v - lse, -lse);
  };

  SUBCASE("forward direction drives class 0") {
    auto& w = params.at("out.weight");
    w.setZero();
    w(0, 0) = 1.0;  // forward half is the first H columns
    auto out = net_forward(img, params, c, NetMode::eval, false);
    REQUIRE(out.log_probs.rows() == 2);
    auto [a0, b0] = logit_pair(hf0);
    auto [a1, b1] = logit_pair(hf1);
    CHECK(out.log_probs(0, 0) == doctest::Approx(a0).epsilon(1e-12));
    CHECK(out.log_probs(0, 1) == doctest::Approx(b0).epsilon(1e-12));
    CHECK(out.log_probs(1, 0) == doctest::Approx(a1).epsilon(1e-12));
    CHECK(out.log_probs(1, 1) == doctest::Approx(b1).epsilon(1e-12));
  }
  SUBCASE("backward direction sees the sequence reversed") {
    auto& w = params.at("out.weight");
    w.setZero();
    w(0, 1) = 1.0;  // backward half is the second H columns
    auto out = net_forward(img, params, c, NetMode::eval, false);
    auto [a0, b0] = logit_pair(hb_at_0);
    auto [a1, b1] = logit_pair(hb_at_1);
    CHECK(out.log_probs(0, 0) == doctest::Approx(a0).epsilon(1e-12));
    CHECK(out.log_probs(1, 0) == doctest::Approx(a1).epsilon(1e-12));
    CHECK(out.log_probs(0, 1) == doctest::Approx(b0).epsilon(1e-12));
    CHECK(out.log_probs(1, 1) == doctest::Approx(b1).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match finite differences") {
  auto c = tiny_config();
  Rng rng(23);
  auto params = init_params(c, rng);
  auto img = random_image(rng, 8, 16);
  const std::vector<int> label = {1, 2, 2, 4};

  auto loss_at = [&](const ParamStore& p, const GrayImage& im) {
    auto out = net_forward(im, p, c, NetMode::train, false);
    return ctc_loss(out.log_probs, label).loss;
  };

  auto out = net_forward(img, params, c, NetMode::train, true);
  auto ctc = ctc_loss(out.log_probs, label);
  auto back = net_backward(ctc.grad, *out.cache, params, c);

  const double eps = 1e-6;
  int checked = 0, ok = 0;
  for (const auto& [name, grad] : back.grads) {
    REQUIRE(is_trainable(name));
    const auto& base = params.at(name);
    REQUIRE(grad.rows() == base.rows());
    REQUIRE(grad.cols() == base.cols());
    for (int i = 0; i < base.rows(); ++i) {
      for (int j = 0; j < base.cols(); ++j) {
        ParamStore up = params, dn = params;
        up.at(name)(i, j) += eps;
        dn.at(name)(i, j) -= eps;
        const double fd = (loss_at(up, img) - loss_at(dn, img)) / (2 * eps);
        const double an = grad(i, j);
        const double rel =
            std::abs(fd - an) / std::max(1.0, std::max(std::abs(fd),
                                                       std::abs(an)));
        ++checked;
        if (rel < 1e-4) ++ok;
      }
    }
  }
  CHECK(static_cast<std::size_t>(checked) == trainable_param_count(c));
  // Leaky-threshold crossings can poison individual finite differences.
  CHECK(static_cast<double>(ok) / checked >= 0.999);

  SUBCASE("input gradient matches finite differences") {
    int bad = 0;
    for (int r = 0; r < 8; ++r) {
      for (int col = 0; col < 16; col += 3) {
        GrayImage up = img, dn = img;
        up.at(r, col) += eps;
        dn.at(r, col) -= eps;
        const double fd = (loss_at(params, up) - loss_at(params, dn)) /
                          (2 * eps);
        const double an = back.input_grad(r, col);
        const double rel =
            std::abs(fd - an) / std::max(1.0, std::max(std::abs(fd),
                                                       std::abs(an)));
        if (rel >= 1e-4) ++bad;
      }
    }
    CHECK(bad <= 1);
  }
}

TEST_CASE("eval-mode gradients also match finite differences") {
  // Batch-norm backward has a separate linear branch when normalizing with
  // running statistics.
  auto c = tiny_config();
  Rng rng(29);
  auto params = init_params(c, rng);
  // Make running stats non-trivial so the eval branch is exercised.
  params.at("bn0.running_mean").setConstant(0.2);
  params.at("bn0.running_var").setConstant(1.7);
  auto img = random_image(rng, 8, 12);
  const std::vector<int> label = {3, 1};

  auto loss_at = [&](const ParamStore& p) {
    auto out = net_forward(img, p, c, NetMode::eval, false);
    return ctc_loss(out.log_probs, label).loss;
  };

  auto out = net_forward(img, params, c, NetMode::eval, true);
  auto ctc = ctc_loss(out.log_probs, label);
  auto back = net_backward(ctc.grad, *out.cache, params, c);

  const double eps = 1e-6;
  int checked = 0, ok = 0;
  for (const auto& [name, grad] : back.grads) {
    const auto& base = params.at(name);
    for (int i = 0; i < base.rows(); ++i) {
      for (int j = 0; j < base.cols(); ++j) {
        ParamStore up = params, dn = params;
        up.at(name)(i, j) += eps;
        dn.at(name)(i, j) -= eps;
        const double fd = (loss_at(up) - loss_at(dn)) / (2 * eps);
        const double an = grad(i, j);
        const double rel =
            std::abs(fd - an) / std::max(1.0, std::max(std::abs(fd),
                                                       std::abs(an)));
        ++checked;
        if (rel < 1e-4) ++ok;
      }
    }
  }
  CHECK(static_cast<double>(ok) / checked >= 0.999);
}

TEST_CASE("replace_output_layer keeps everything else bit-exact") {
  auto c = tiny_config();
  Rng rng(41);
  auto params = init_params(c, rng);
  auto swapped = replace_output_layer(params, 9, 77);
  for (const auto& [k, v] : params) {
    if (k == "out.weight" || k == "out.bias") continue;
    CHECK(v == swapped.at(k));
  }
  CHECK(swapped.at("out.weight").rows() == 9);
  CHECK(swapped.at("out.weight").cols() == params.at("out.weight").cols());
  CHECK(swapped.at("out.bias").rows() == 9);
  CHECK(swapped.at("out.bias").isZero());

  SUBCASE("seeded head init is reproducible") {
    auto again = replace_output_layer(params, 9, 77);
    CHECK(again.at("out.weight") == swapped.at("out.weight"));
    auto other = replace_output_layer(params, 9, 78);
    CHECK(other.at("out.weight") != swapped.at("out.weight"));
  }
}
