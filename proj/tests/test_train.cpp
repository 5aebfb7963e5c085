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

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "htrner/checkpoint.hpp"
#include "htrner/ctc.hpp"
#include "htrner/error.hpp"
#include "htrner/synth.hpp"
#include "htrner/train.hpp"

using namespace htrner;
namespace fs = std::filesystem;

namespace {

// One small prepared dataset shared by every case in this file.
const LoadedDataset& tiny_dataset() {
  static const LoadedDataset ds = [] {
    auto raw = fs::temp_directory_path() / "htrner_train_raw";
    auto out = fs::temp_directory_path() / "htrner_train_prep";
    fs::remove_all(raw);
    fs::remove_all(out);
    SynthConfig cfg;
    cfg.n_records = 6;
    auto pages = synth_generate(3, cfg);
    write_synth_dataset(pages, raw.string());
    PrepareOptions opt;
    opt.scheme = TagScheme::combined;
    opt.level = SampleLevel::line;
    opt.input_height = 32;
    prepare_dataset((raw / "manifest.json").string(), out.string(), opt);
    return load_dataset(out.string());
  }();
  return ds;
}

NetworkConfig tiny_net() {
  NetworkConfig c;
  c.input_height = 32;
  c.conv_blocks = {{4, 3, 3, 2, 2}, {8, 3, 3, 2, 2}};
  c.lstm_layers = 1;
  c.lstm_hidden = 16;
  c.num_classes = tiny_dataset().symbols.size();
  return c;
}

// Training-split samples whose targets fit their frame budgets with slack.
std::vector<LoadedSample> feasible_samples(std::size_t want) {
  const auto& ds = tiny_dataset();
  auto net = tiny_net();
  std::vector<LoadedSample> out;
  for (const auto& s : ds.train) {
    if (frame_count(net, s.image.width()) >=
        min_frames(s.target) + 2)
      out.push_back(s);
    if (out.size() == want) break;
  }
  REQUIRE(out.size() == want);
  return out;
}

TrainConfig fast_config() {
  TrainConfig t;
  t.lr0 = 3e-3;
  t.batch_size = 2;
  t.adv_weight = 0.0;
  t.early_stop_patience = 0;
  t.deterministic_timing = true;
  return t;
}

bool same_params(const ParamStore& a, const ParamStore& b) {
  if (a.size() != b.size()) return false;
  for (const auto& [k, v] : a) {
    auto it = b.find(k);
    if (it == b.end() || v.rows() != it->second.rows() ||
        v.cols() != it->second.cols() || v != it->second)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig t;
  validate_train_config(t);
  SUBCASE("lr0") {
    t.lr0 = 0.0;
    CHECK_THROWS_AS(validate_train_config(t), ConfigError);
  }
  SUBCASE("decay") {
    t.lr_decay_per_epoch = 0.0;
    CHECK_THROWS_AS(validate_train_config(t), ConfigError);
    t.lr_decay_per_epoch = 1.5;
    CHECK_THROWS_AS(validate_train_config(t), ConfigError);
  }
  SUBCASE("batch") {
    t.batch_size = 0;
    CHECK_THROWS_AS(validate_train_config(t), ConfigError);
  }
  SUBCASE("adversarial weight") {
    t.adv_weight = -0.1;
    CHECK_THROWS_AS(validate_train_config(t), ConfigError);
  }
  SUBCASE("max epochs") {
    t.max_epochs = 0;
    CHECK_THROWS_AS(validate_train_config(t), ConfigError);
  }
}

TEST_CASE("an epoch is deterministic in its inputs") {
  auto samples = feasible_samples(4);
  auto net = tiny_net();
  auto cfg = fast_config();

  Rng ra(9), rb(9);
  Rng init_a(2), init_b(2);
  auto pa = init_params(net, init_a);
  auto pb = init_params(net, init_b);
  ParamStore va, vb;
  auto sa = train_epoch(pa, va, samples, net, cfg, 0, ra);
  auto sb = train_epoch(pb, vb, samples, net, cfg, 0, rb);
  CHECK(sa.mean_loss == sb.mean_loss);
  CHECK(sa.train_cer == sb.train_cer);
  CHECK(sa.used_samples == 4);
  CHECK(sa.skipped_infeasible == 0);
  CHECK(same_params(pa, pb));

  SUBCASE("the adversarial branch changes the trajectory") {
    Rng rc(9);
    Rng init_c(2);
    auto pc = init_params(net, init_c);
    ParamStore vc;
    auto adv = cfg;
    adv.adv_weight = 0.5;
    auto sc = train_epoch(pc, vc, samples, net, adv, 0, rc);
    CHECK(sc.used_samples == 4);
    CHECK(!same_params(pa, pc));
    CHECK(sc.mean_loss > sa.mean_loss);  // the extra term is a positive loss
  }

  SUBCASE("a zero-epsilon adversary is a learning-rate rescale") {
    Rng rc(9), rd(9);
    Rng init_c(2), init_d(2);
    auto pc = init_params(net, init_c);
    auto pd = init_params(net, init_d);
    ParamStore vc, vd;
    // Clipping would rescale the two gradients differently; turn it off so
    // the identity update(g, 2 lr) = update(2 g, lr) is exact.
    auto doubled = cfg;
    doubled.adv_weight = 1.0;
    doubled.adv_epsilon = 0.0;
    doubled.clip_norm = 0.0;
    auto halfrate = cfg;
    halfrate.lr0 = cfg.lr0 * 2.0;
    halfrate.clip_norm = 0.0;
    (void)train_epoch(pc, vc, samples, net, doubled, 0, rc);
    (void)train_epoch(pd, vd, samples, net, halfrate, 0, rd);
    for (const auto& [k, v] : pc) {
      // Running statistics fall outside the identity: the extra forward
      // folds its batch statistics a second time.
      if (!is_trainable(k)) continue;
      CHECK((v - pd.at(k)).cwiseAbs().maxCoeff() ==
            doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("infeasible targets are skipped and counted") {
  auto samples = feasible_samples(3);
  auto net = tiny_net();
  auto cfg = fast_config();
  LoadedSample bad = samples[0];
  const int t_frames = frame_count(net, bad.image.width());
  bad.target.assign(static_cast<std::size_t>(t_frames) + 1, 5);
  samples.push_back(bad);

  Rng rng(4);
  Rng init(2);
  auto params = init_params(net, init);
  ParamStore velocity;
  auto stats = train_epoch(params, velocity, samples, net, cfg, 0, rng);
  CHECK(stats.skipped_infeasible == 1);
  CHECK(stats.used_samples == 3);

  SUBCASE("an empty dataset is an error") {
    std::vector<LoadedSample> none;
    CHECK_THROWS_AS(train_epoch(params, velocity, none, net, cfg, 0, rng),
                    DataError);
  }
}

TEST_CASE("a non-finite loss raises a numeric error") {
  auto samples = feasible_samples(2);
  auto net = tiny_net();
  auto cfg = fast_config();
  Rng rng(4);
  Rng init(2);
  auto params = init_params(net, init);
  params.at("out.bias")(0, 0) = std::numeric_limits<double>::quiet_NaN();
  ParamStore velocity;
  CHECK_THROWS_AS(train_epoch(params, velocity, samples, net, cfg, 0, rng),
                  NumericError);
}

TEST_CASE("a tiny model memorizes a tiny set") {
  // The shortest feasible line escapes the all-blank plateau fastest;
  // momentum roughly quarters the epochs it takes.
  auto all = feasible_samples(4);
  std::sort(all.begin(), all.end(),
            [](const LoadedSample& a, const LoadedSample& b) {
              return a.target.size() < b.target.size();
            });
  std::vector<LoadedSample> samples(all.begin(), all.begin() + 1);
  auto net = tiny_net();
  auto cfg = fast_config();
  cfg.lr0 = 1e-2;
  cfg.lr_decay_per_epoch = 1.0;
  cfg.momentum = 0.9;
  Rng rng(12);
  Rng init(1);
  auto params = init_params(net, init);
  ParamStore velocity;

  double first_loss = 0.0, last_loss = 0.0, last_cer = 100.0;
  double eval_cer = 100.0;
  for (int epoch = 0; epoch < 300; ++epoch) {
    auto stats = train_epoch(params, velocity, samples, net, cfg, epoch, rng);
    if (epoch == 0) first_loss = stats.mean_loss;
    last_loss = stats.mean_loss;
    last_cer = stats.train_cer;
    // Once training-mode decoding is clean, keep going until the running
    // statistics settle enough for the eval-mode forward to agree.
    if (last_cer == 0.0) {
      eval_cer = evaluate_cer(params, net, samples);
      if (eval_cer == 0.0) break;
    }
  }
  CHECK(last_cer == 0.0);
  CHECK(last_loss < first_loss);
  CHECK(eval_cer == 0.0);

  SUBCASE("a memorized split scores perfectly on both tracks") {
    auto scores = score_split(params, net, samples, tiny_dataset().symbols,
                              TagScheme::combined);
    CHECK(scores.cer == 0.0);
    CHECK(scores.basic == doctest::Approx(100.0));
    CHECK(scores.complete == doctest::Approx(100.0));
  }
}

TEST_CASE("run_phase logs the schedule and keeps the best parameters") {
  auto train_set = feasible_samples(3);
  auto valid_set = feasible_samples(2);
  auto net = tiny_net();
  auto cfg = fast_config();
  cfg.max_epochs = 4;
  cfg.lr0 = 1e-3;
  cfg.lr_decay_per_epoch = 0.9;

  TrainState state;
  Rng init(8);
  state.params = init_params(net, init);
  state.rng = Rng(41);
  MetricsLog log;
  std::vector<int> hook_epochs;
  std::vector<bool> hook_improved;
  run_phase(state, net, cfg, train_set, valid_set, "warmup", log,
            [&](const TrainState&, int epoch, bool improved) {
              hook_epochs.push_back(epoch);
              hook_improved.push_back(improved);
            });

  REQUIRE(log.rows.size() == 4);
  for (int e = 0; e < 4; ++e) {
    CHECK(log.rows[e].epoch == e);
    CHECK(log.rows[e].phase == "warmup");
    CHECK(log.rows[e].lr == doctest::Approx(1e-3 * std::pow(0.9, e)));
    CHECK(log.rows[e].seconds == 0.0);  // deterministic timing requested
    CHECK(log.rows[e].valid_cer >= 0.0);
  }
  CHECK(hook_epochs == std::vector<int>{0, 1, 2, 3});
  CHECK(hook_improved[0]);  // the first validation is always a new best
  CHECK(state.next_epoch == 4);
  CHECK(state.best_epoch >= 0);
  CHECK(same_params(state.params, state.best_params));

  SUBCASE("csv format") {
    auto csv = log.to_csv();
    CHECK(csv.rfind("epoch,phase,lr,train_cer,valid_cer,train_loss,seconds\n",
                    0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("warmup") != std::string::npos);
  }
}

TEST_CASE("early stopping halts a stalled run") {
  auto train_set = feasible_samples(2);
  auto net = tiny_net();
  auto cfg = fast_config();
  cfg.lr0 = 1e-12;  // effectively frozen, so validation never improves
  cfg.max_epochs = 50;
  cfg.early_stop_patience = 2;

  TrainState state;
  Rng init(8);
  state.params = init_params(net, init);
  state.rng = Rng(41);
  MetricsLog log;
  run_phase(state, net, cfg, train_set, train_set, "stall", log);
  // Epoch 0 sets the best; two stale epochs exhaust the patience.
  CHECK(log.rows.size() == 3);
  CHECK(state.best_epoch == 0);
}

TEST_CASE("two identical runs write identical logs") {
  auto train_set = feasible_samples(3);
  auto net = tiny_net();
  auto cfg = fast_config();
  cfg.max_epochs = 2;

  auto run_once = [&]() {
    TrainState state;
    Rng init(8);
    state.params = init_params(net, init);
    state.rng = Rng(41);
    MetricsLog log;
    run_phase(state, net, cfg, train_set, train_set, "p", log);
    return std::pair(log.to_csv(), state.params);
  };
  auto [csv1, p1] = run_once();
  auto [csv2, p2] = run_once();
  CHECK(csv1 == csv2);
  CHECK(same_params(p1, p2));
}

TEST_CASE("curriculum runs lines then records from the same weights") {
  auto line_set = feasible_samples(3);
  // Stand-in record set: the same images, so the test stays fast. The phase
  // switch itself is what is under test.
  auto record_set = feasible_samples(2);
  auto net = tiny_net();
  auto cfg = fast_config();
  cfg.max_epochs = 2;
  cfg.curriculum = Curriculum::lines_then_records;

  TrainState state;
  Rng init(8);
  state.params = init_params(net, init);
  state.rng = Rng(41);
  MetricsLog log;
  run_curriculum(state, net, cfg, line_set, line_set, record_set, record_set,
                 log);

  REQUIRE(log.rows.size() == 4);
  CHECK(log.rows[0].phase == "lines");
  CHECK(log.rows[1].phase == "lines");
  CHECK(log.rows[2].phase == "records");
  CHECK(log.rows[3].phase == "records");
  // Per-phase epoch counters and learning-rate schedule restart.
  CHECK(log.rows[2].epoch == 0);
  CHECK(log.rows[2].lr == doctest::Approx(cfg.lr0));

  SUBCASE("matches a manual two-phase run") {
    TrainState manual;
    Rng init2(8);
    manual.params = init_params(net, init2);
    manual.rng = Rng(41);
    MetricsLog manual_log;
    run_phase(manual, net, cfg, line_set, line_set, "lines", manual_log);
    manual.next_epoch = 0;
    manual.best_valid_cer = -1.0;
    manual.best_epoch = -1;
    run_phase(manual, net, cfg, record_set, record_set, "records", manual_log);
    CHECK(manual_log.to_csv() == log.to_csv());
    CHECK(same_params(manual.params, state.params));
  }
}

TEST_CASE("resuming mid-run reproduces the uninterrupted run") {
  auto train_set = feasible_samples(3);
  auto net = tiny_net();
  auto cfg = fast_config();
  cfg.max_epochs = 4;

  // Uninterrupted reference, snapshotting the live end-of-epoch-1 state the
  // way a checkpointing caller would: the hook sees live parameters, while
  // the returned state holds the best ones.
  TrainState full;
  Rng init(8);
  full.params = init_params(net, init);
  full.rng = Rng(41);
  MetricsLog full_log;
  Checkpoint last, best;
  run_phase(full, net, cfg, train_set, train_set, "p", full_log,
            [&](const TrainState& s, int epoch, bool) {
              if (epoch != 1) return;
              last.config = net;
              last.symbols = tiny_dataset().symbols;
              last.params = s.params;
              last.velocity = s.velocity;
              last.epoch = epoch + 1;
              last.best_valid_cer = s.best_valid_cer;
              last.best_epoch = s.best_epoch;
              last.rng_state = s.rng.serialize();
              best = last;
              best.params = s.best_params;
            });

  auto dir = fs::temp_directory_path() / "htrner_resume";
  fs::create_directories(dir);
  save_checkpoint((dir / "last.ckpt").string(), last);
  save_checkpoint((dir / "best.ckpt").string(), best);
  auto last_in = load_checkpoint((dir / "last.ckpt").string());
  auto best_in = load_checkpoint((dir / "best.ckpt").string());

  TrainState resumed;
  resumed.params = last_in.params;
  resumed.velocity = last_in.velocity;
  resumed.best_params = best_in.params;
  resumed.best_valid_cer = last_in.best_valid_cer;
  resumed.best_epoch = last_in.best_epoch;
  resumed.next_epoch = last_in.epoch;
  resumed.rng = Rng::deserialize(last_in.rng_state);
  MetricsLog resumed_log;
  run_phase(resumed, net, cfg, train_set, train_set, "p", resumed_log);

  // The resumed log continues exactly where the full log's epoch 2 begins.
  MetricsLog tail;
  tail.rows.assign(full_log.rows.begin() + 2, full_log.rows.end());
  CHECK(resumed_log.to_csv() == tail.to_csv());
  CHECK(same_params(resumed.params, full.params));
  CHECK(resumed.best_valid_cer == full.best_valid_cer);
  CHECK(resumed.best_epoch == full.best_epoch);
}
