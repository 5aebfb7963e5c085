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

#include <vector>

#include <Eigen/Dense>

#include "htrner/ctc.hpp"
#include "htrner/rng.hpp"

namespace {

using htrner::Rng;

// Random log-distribution rows and a feasible label, sized like one text
// line under the reference network (T ~ width/8, K ~ alphabet size).
struct Fixture {
  Eigen::MatrixXd log_probs;
  std::vector<int> label;
};

Fixture make_fixture(int frames, int classes, int label_len) {
  Rng rng(17);
  Eigen::MatrixXd logits(frames, classes);
  for (int t = 0; t < frames; ++t)
    for (int k = 0; k < classes; ++k) logits(t, k) = rng.gauss();
  Eigen::MatrixXd log_probs = logits;
  for (int t = 0; t < frames; ++t) {
    const double mx = logits.row(t).maxCoeff();
    const double lse =
        mx + std::log((logits.row(t).array() - mx).exp().sum());
    log_probs.row(t).array() -= lse;
  }
  std::vector<int> label;
  int prev = 0;
  for (int i = 0; i < label_len; ++i) {
    int s = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(
                    classes - 1)));
    if (s == prev) s = 1 + s % (classes - 1);  // avoid repeats: shorter path
    label.push_back(s);
    prev = s;
  }
  return {std::move(log_probs), std::move(label)};
}

void BM_CtcLossAndGrad(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  const int classes = static_cast<int>(state.range(1));
  const int label_len = static_cast<int>(state.range(2));
  const Fixture f = make_fixture(frames, classes, label_len);
  for (auto _ : state) {
    const auto r = htrner::ctc_loss(f.log_probs, f.label);
    benchmark::DoNotOptimize(r.loss);
    benchmark::DoNotOptimize(r.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * frames);
}

void BM_BestPathDecode(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  const Fixture f = make_fixture(frames, 45, 10);
  for (auto _ : state) {
    auto decoded = htrner::best_path_decode(f.log_probs);
    benchmark::DoNotOptimize(decoded.data());
  }
  state.SetItemsProcessed(state.iterations() * frames);
}

}  // namespace

// frames x classes x label length: short line, long line, record strip.
BENCHMARK(BM_CtcLossAndGrad)
    ->Args({32, 45, 12})
    ->Args({128, 45, 40})
    ->Args({512, 45, 160})
    ->Args({128, 90, 40});

BENCHMARK(BM_BestPathDecode)->Arg(32)->Arg(128)->Arg(512);
