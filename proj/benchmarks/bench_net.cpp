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

#include <benchmark/benchmark.h>

#include "htrner/image.hpp"
#include "htrner/net.hpp"
#include "htrner/rng.hpp"

namespace {

using namespace htrner;

GrayImage noise_image(int height, int width) {
  Rng rng(5);
  GrayImage img(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) img.at(r, c) = rng.uniform();
  return img;
}

// The published architecture on a full-height line; the small variant is
// the size the unit and acceptance suites train.
NetworkConfig reference_net() { return NetworkConfig::reference(45); }

NetworkConfig small_net() {
  NetworkConfig c;
  c.input_height = 32;
  c.conv_blocks = {{4, 3, 3, 2, 2}, {8, 3, 3, 2, 2}};
  c.lstm_layers = 1;
  c.lstm_hidden = 24;
  c.num_classes = 45;
  return c;
}

void run_forward(benchmark::State& state, const NetworkConfig& config,
                 int width, NetMode mode) {
  Rng rng(7);
  const ParamStore params = init_params(config, rng);
  const GrayImage img = noise_image(config.input_height, width);
  for (auto _ : state) {
    const auto fwd = net_forward(img, params, config, mode, false);
    benchmark::DoNotOptimize(fwd.log_probs.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          frame_count(config, width));
}

void BM_ForwardEvalReference(benchmark::State& state) {
  run_forward(state, reference_net(), static_cast<int>(state.range(0)),
              NetMode::eval);
}

void BM_ForwardEvalSmall(benchmark::State& state) {
  run_forward(state, small_net(), static_cast<int>(state.range(0)),
              NetMode::eval);
}

void BM_ForwardBackwardReference(benchmark::State& state) {
  const NetworkConfig config = reference_net();
  Rng rng(7);
  const ParamStore params = init_params(config, rng);
  const int width = static_cast<int>(state.range(0));
  const GrayImage img = noise_image(config.input_height, width);
  for (auto _ : state) {
    const auto fwd = net_forward(img, params, config, NetMode::train, true);
    Eigen::MatrixXd grad = Eigen::MatrixXd::Constant(
        fwd.log_probs.rows(), fwd.log_probs.cols(),
        1.0 / static_cast<double>(fwd.log_probs.size()));
    const auto bwd = net_backward(grad, *fwd.cache, params, config);
    benchmark::DoNotOptimize(bwd.grads.size());
  }
  state.SetItemsProcessed(state.iterations() * frame_count(config, width));
}

}  // namespace

BENCHMARK(BM_ForwardEvalReference)->Arg(256)->Arg(1024)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardEvalSmall)->Arg(256)->Arg(1024)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ForwardBackwardReference)->Arg(256)
    ->Unit(benchmark::kMillisecond);
