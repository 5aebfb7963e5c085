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

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "htrner/data.hpp"
#include "htrner/eval.hpp"
#include "htrner/net.hpp"
#include "htrner/rng.hpp"

namespace htrner {

enum class Curriculum { off, lines_then_records };

struct TrainConfig {
  double lr0 = 5e-4;
  double lr_decay_per_epoch = 0.99;
  int batch_size = 6;
  double adv_weight = 0.5;
  double adv_epsilon = 0.05;  // intensity units for the sign perturbation
  int max_epochs = 150;
  double momentum = 0.0;   // 0 = plain SGD
  double clip_norm = 5.0;  // global gradient norm cap; <= 0 disables
  int early_stop_patience = 20;  // epochs without valid-CER gain; <= 0 off
  std::uint64_t seed = 1;

  // Pipeline orchestration (used by callers that own data loading).
  TagScheme scheme = TagScheme::combined;
  SampleLevel level = SampleLevel::line;
  Curriculum curriculum = Curriculum::off;

  // Writes 0 in the wall-time column so two identical runs produce
  // byte-identical logs.
  bool deterministic_timing = false;
};

void validate_train_config(const TrainConfig& config);

struct MetricsRow {
  int epoch = 0;  // per-phase index
  std::string phase;
  double lr = 0.0;
  double train_cer = 0.0;  // percent
  double valid_cer = 0.0;  // percent
  double train_loss = 0.0;
  double seconds = 0.0;
};

struct MetricsLog {
  std::vector<MetricsRow> rows;
  // Header "epoch,phase,lr,train_cer,valid_cer,train_loss,seconds".
  std::string to_csv() const;
  void save(const std::string& path) const;
};

struct EpochStats {
  double mean_loss = 0.0;
  double train_cer = 0.0;  // percent
  int skipped_infeasible = 0;
  int used_samples = 0;
};

// One pass over the shuffled training set: per batch, clean forward/backward,
// the sign-perturbation branch when adv_weight > 0 (the perturbed input is a
// constant; only the second forward propagates gradients), batch-averaged
// SGD step at lr0 * decay^epoch_index. Infeasible targets are skipped and
// counted. Throws NumericError when the loss stops being finite.
EpochStats train_epoch(ParamStore& params, ParamStore& velocity,
                       const std::vector<LoadedSample>& samples,
                       const NetworkConfig& net_config,
                       const TrainConfig& config, int epoch_index, Rng& rng);

// Mean best-path CER over a split, in percent, eval-mode statistics.
double evaluate_cer(const ParamStore& params, const NetworkConfig& net_config,
                    const std::vector<LoadedSample>& samples);

// Everything a resumed run needs.
struct TrainState {
  ParamStore params;
  ParamStore velocity;
  ParamStore best_params;
  double best_valid_cer = -1.0;  // negative = none yet
  int best_epoch = -1;
  int next_epoch = 0;
  Rng rng{0};
};

// Called after each epoch with the state and the epoch index; `improved`
// reports a new best validation CER.
using EpochHook =
    std::function<void(const TrainState& state, int epoch, bool improved)>;

// Runs epochs [state.next_epoch, max_epochs) with early stopping on
// validation CER. On return state.params holds the best-validation
// parameters and state.next_epoch the first unrun epoch.
void run_phase(TrainState& state, const NetworkConfig& net_config,
               const TrainConfig& config,
               const std::vector<LoadedSample>& train_set,
               const std::vector<LoadedSample>& valid_set,
               const std::string& phase, MetricsLog& log,
               const EpochHook& hook = {});

// Phase "lines" then phase "records" from the same parameters, with the
// learning-rate schedule restarted for the second phase.
void run_curriculum(TrainState& state, const NetworkConfig& net_config,
                    const TrainConfig& config,
                    const std::vector<LoadedSample>& line_train,
                    const std::vector<LoadedSample>& line_valid,
                    const std::vector<LoadedSample>& record_train,
                    const std::vector<LoadedSample>& record_valid,
                    MetricsLog& log, const EpochHook& hook = {});

// Decodes a split and scores it against its own annotations: samples are
// grouped into records in index order, predictions decoded in repair mode.
struct SplitScores {
  double basic = 0.0;
  double complete = 0.0;
  double cer = 0.0;  // percent, over encoded targets
};

SplitScores score_split(const ParamStore& params,
                        const NetworkConfig& net_config,
                        const std::vector<LoadedSample>& samples,
                        const SymbolTable& symbols, TagScheme scheme,
                        ScoreOptions options = {});

}  // namespace htrner
