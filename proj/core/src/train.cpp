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

#include "htrner/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "htrner/ctc.hpp"
#include "htrner/error.hpp"
#include "htrner/tag_codec.hpp"
#include "htrner/thread_pool.hpp"

namespace htrner {

void validate_train_config(const TrainConfig& config) {
  if (!(config.lr0 > 0)) throw ConfigError("train: lr0 must be positive");
  if (!(config.lr_decay_per_epoch > 0) || config.lr_decay_per_epoch > 1.0)
    throw ConfigError("train: lr decay must be in (0, 1]");
  if (config.batch_size < 1) throw ConfigError("train: batch_size < 1");
  if (config.adv_weight < 0) throw ConfigError("train: adv_weight < 0");
  if (config.adv_epsilon < 0) throw ConfigError("train: adv_epsilon < 0");
  if (config.max_epochs < 1) throw ConfigError("train: max_epochs < 1");
  if (config.momentum < 0 || config.momentum >= 1)
    throw ConfigError("train: momentum outside [0, 1)");
}

std::string MetricsLog::to_csv() const {
  std::string out = "epoch,phase,lr,train_cer,valid_cer,train_loss,seconds\n";
  char buf[192];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%.10g,%.6f,%.6f,%.10g,%.3f\n",
                  r.epoch, r.phase.c_str(), r.lr, r.train_cer, r.valid_cer,
                  r.train_loss, r.seconds);
    out += buf;
  }
  return out;
}

void MetricsLog::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("metrics: cannot write " + path);
  out << to_csv();
  if (!out) throw DataError("metrics: write failed: " + path);
}

namespace {

struct ItemResult {
  bool feasible = false;
  double loss = 0.0;  // clean + weighted adversarial
  ParamStore grads;
  RunningStatsDelta clean_stats;
  RunningStatsDelta adv_stats;
  long edits = 0;
  long target_len = 0;
};

ItemResult process_item(const LoadedSample& sample, const ParamStore& params,
                        const NetworkConfig& net_config,
                        const TrainConfig& config) {
  ItemResult res;
  res.target_len = static_cast<long>(sample.target.size());

  NetForward fwd;
  CtcResult ctc;
  try {
    fwd = net_forward(sample.image, params, net_config, NetMode::train, true);
    ctc = ctc_loss(fwd.log_probs, sample.target);
  } catch (const InfeasibleTarget&) {
    return res;  // skipped, counted by the caller
  }
  res.feasible = true;
  res.clean_stats = fwd.stats;
  res.loss = ctc.loss;

  NetBackward bw = net_backward(ctc.grad, *fwd.cache, params, net_config);
  res.grads = std::move(bw.grads);

  if (config.adv_weight > 0) {
    // Fast sign perturbation from the clean input gradient, treated as a
    // constant input afterwards.
    GrayImage adv(sample.image.height(), sample.image.width());
    for (int r = 0; r < adv.height(); ++r) {
      for (int c = 0; c < adv.width(); ++c) {
        const double g = bw.input_grad(r, c);
        const double sign = g > 0 ? 1.0 : g < 0 ? -1.0 : 0.0;
        adv.at(r, c) = std::clamp(
            sample.image.at(r, c) + config.adv_epsilon * sign, 0.0, 1.0);
      }
    }
    NetForward fwd2 =
        net_forward(adv, params, net_config, NetMode::train, true);
    const CtcResult ctc2 = ctc_loss(fwd2.log_probs, sample.target);
    NetBackward bw2 = net_backward(ctc2.grad, *fwd2.cache, params, net_config);
    for (auto& [name, grad] : res.grads)
      grad += config.adv_weight * bw2.grads.at(name);
    res.loss += config.adv_weight * ctc2.loss;
    res.adv_stats = fwd2.stats;
  }

  const std::vector<int> decoded = best_path_decode(fwd.log_probs);
  res.edits = static_cast<long>(edit_distance(decoded, sample.target));
  return res;
}

double global_norm(const ParamStore& grads) {
  double sum = 0.0;
  for (const auto& [name, g] : grads) sum += g.squaredNorm();
  return std::sqrt(sum);
}

}  // namespace

EpochStats train_epoch(ParamStore& params, ParamStore& velocity,
                       const std::vector<LoadedSample>& samples,
                       const NetworkConfig& net_config,
                       const TrainConfig& config, int epoch_index, Rng& rng) {
  validate_train_config(config);
  if (samples.empty()) throw DataError("train_epoch: empty dataset");
  const double lr =
      config.lr0 * std::pow(config.lr_decay_per_epoch, epoch_index);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  EpochStats stats;
  double loss_sum = 0.0;
  long edit_sum = 0, len_sum = 0;

  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t end = std::min(
        order.size(), start + static_cast<std::size_t>(config.batch_size));
    const int n = static_cast<int>(end - start);

    std::vector<ItemResult> results(static_cast<std::size_t>(n));
    parallel_for(n, [&](int i) {
      results[static_cast<std::size_t>(i)] =
          process_item(samples[order[start + static_cast<std::size_t>(i)]],
                       params, net_config, config);
    });

    // Ordered reduction keeps sums identical under any worker count.
    ParamStore batch_grads;
    int used = 0;
    for (int i = 0; i < n; ++i) {
      ItemResult& r = results[static_cast<std::size_t>(i)];
      if (!r.feasible) {
        ++stats.skipped_infeasible;
        continue;
      }
      if (!std::isfinite(r.loss))
        throw NumericError(
            "train_epoch: non-finite loss at epoch " +
            std::to_string(epoch_index) + ", sample " +
            samples[order[start + static_cast<std::size_t>(i)]].id);
      if (batch_grads.empty()) {
        batch_grads = std::move(r.grads);
      } else {
        for (auto& [name, g] : batch_grads) g += r.grads.at(name);
      }
      apply_running_stats(params, r.clean_stats, net_config);
      if (config.adv_weight > 0)
        apply_running_stats(params, r.adv_stats, net_config);
      loss_sum += r.loss;
      edit_sum += r.edits;
      len_sum += r.target_len;
      ++used;
    }
    if (used == 0) continue;
    stats.used_samples += used;

    for (auto& [name, g] : batch_grads) g /= used;
    if (config.clip_norm > 0) {
      const double norm = global_norm(batch_grads);
      if (norm > config.clip_norm)
        for (auto& [name, g] : batch_grads) g *= config.clip_norm / norm;
    }

    if (config.momentum > 0) {
      for (auto& [name, g] : batch_grads) {
        auto [it, inserted] = velocity.try_emplace(
            name, Eigen::MatrixXd::Zero(g.rows(), g.cols()));
        it->second = config.momentum * it->second - lr * g;
        params.at(name) += it->second;
      }
    } else {
      for (const auto& [name, g] : batch_grads) params.at(name) -= lr * g;
    }
  }

  if (stats.used_samples == 0)
    throw DataError("train_epoch: every sample was infeasible");
  stats.mean_loss = loss_sum / stats.used_samples;
  stats.train_cer =
      len_sum > 0 ? 100.0 * static_cast<double>(edit_sum) / len_sum : 0.0;
  return stats;
}

double evaluate_cer(const ParamStore& params, const NetworkConfig& net_config,
                    const std::vector<LoadedSample>& samples) {
  if (samples.empty()) throw DataError("evaluate_cer: empty split");
  std::vector<long> edits(samples.size(), 0);
  parallel_for(static_cast<int>(samples.size()), [&](int i) {
    const LoadedSample& s = samples[static_cast<std::size_t>(i)];
    const NetForward fwd =
        net_forward(s.image, params, net_config, NetMode::eval, false);
    edits[static_cast<std::size_t>(i)] = static_cast<long>(
        edit_distance(best_path_decode(fwd.log_probs), s.target));
  });
  long edit_sum = 0, len_sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    edit_sum += edits[i];
    len_sum += static_cast<long>(samples[i].target.size());
  }
  if (len_sum == 0) throw DataError("evaluate_cer: empty targets");
  return 100.0 * static_cast<double>(edit_sum) / len_sum;
}

void run_phase(TrainState& state, const NetworkConfig& net_config,
               const TrainConfig& config,
               const std::vector<LoadedSample>& train_set,
               const std::vector<LoadedSample>& valid_set,
               const std::string& phase, MetricsLog& log,
               const EpochHook& hook) {
  validate_train_config(config);
  if (state.best_params.empty()) state.best_params = state.params;

  for (int epoch = state.next_epoch; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const EpochStats stats = train_epoch(state.params, state.velocity,
                                         train_set, net_config, config, epoch,
                                         state.rng);
    const double valid =
        evaluate_cer(state.params, net_config, valid_set);
    const double seconds =
        config.deterministic_timing
            ? 0.0
            : std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                            t0)
                  .count();

    MetricsRow row;
    row.epoch = epoch;
    row.phase = phase;
    row.lr = config.lr0 * std::pow(config.lr_decay_per_epoch, epoch);
    row.train_cer = stats.train_cer;
    row.valid_cer = valid;
    row.train_loss = stats.mean_loss;
    row.seconds = seconds;
    log.rows.push_back(row);

    const bool improved =
        state.best_valid_cer < 0 || valid < state.best_valid_cer;
    if (improved) {
      state.best_valid_cer = valid;
      state.best_epoch = epoch;
      state.best_params = state.params;
    }
    state.next_epoch = epoch + 1;
    if (hook) hook(state, epoch, improved);

    if (config.early_stop_patience > 0 && state.best_epoch >= 0 &&
        epoch - state.best_epoch >= config.early_stop_patience)
      break;
  }

  // The phase result is the best-validation snapshot.
  state.params = state.best_params;
}

void run_curriculum(TrainState& state, const NetworkConfig& net_config,
                    const TrainConfig& config,
                    const std::vector<LoadedSample>& line_train,
                    const std::vector<LoadedSample>& line_valid,
                    const std::vector<LoadedSample>& record_train,
                    const std::vector<LoadedSample>& record_valid,
                    MetricsLog& log, const EpochHook& hook) {
  run_phase(state, net_config, config, line_train, line_valid, "lines", log,
            hook);
  // Second phase restarts the schedule and trackers but keeps the learned
  // parameters.
  state.velocity.clear();
  state.best_params.clear();
  state.best_valid_cer = -1.0;
  state.best_epoch = -1;
  state.next_epoch = 0;
  run_phase(state, net_config, config, record_train, record_valid, "records",
            log, hook);
}

SplitScores score_split(const ParamStore& params,
                        const NetworkConfig& net_config,
                        const std::vector<LoadedSample>& samples,
                        const SymbolTable& symbols, TagScheme scheme,
                        ScoreOptions options) {
  if (samples.empty()) throw DataError("score_split: empty split");

  std::vector<AnnotatedRecord> predictions(samples.size());
  std::vector<long> edits(samples.size(), 0);
  parallel_for(static_cast<int>(samples.size()), [&](int i) {
    const LoadedSample& s = samples[static_cast<std::size_t>(i)];
    const NetForward fwd =
        net_forward(s.image, params, net_config, NetMode::eval, false);
    const std::vector<int> decoded = best_path_decode(fwd.log_probs);
    edits[static_cast<std::size_t>(i)] =
        static_cast<long>(edit_distance(decoded, s.target));
    predictions[static_cast<std::size_t>(i)] =
        decode(decoded, scheme, symbols, DecodeMode::repair);
  });

  // Samples of one record are consecutive in index order; stitch them back
  // into whole-record word lists.
  std::vector<std::pair<AnnotatedRecord, AnnotatedRecord>> pairs;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (pairs.empty() || pairs.back().first.record_id != samples[i].record_id) {
      AnnotatedRecord gt;
      gt.record_id = samples[i].record_id;
      pairs.emplace_back(std::move(gt), AnnotatedRecord{});
      pairs.back().second.record_id = samples[i].record_id;
    }
    auto& [gt, pred] = pairs.back();
    gt.words.insert(gt.words.end(), samples[i].words.words.begin(),
                    samples[i].words.words.end());
    pred.words.insert(pred.words.end(), predictions[i].words.begin(),
                      predictions[i].words.end());
  }

  SplitScores out;
  out.basic = score_dataset(pairs, TrackKind::basic, options);
  out.complete = score_dataset(pairs, TrackKind::complete, options);
  long edit_sum = 0, len_sum = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    edit_sum += edits[i];
    len_sum += static_cast<long>(samples[i].target.size());
  }
  out.cer = len_sum > 0
                ? 100.0 * static_cast<double>(edit_sum) / len_sum
                : 0.0;
  return out;
}

}  // namespace htrner
