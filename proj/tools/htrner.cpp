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

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "htrner/checkpoint.hpp"
#include "htrner/ctc.hpp"
#include "htrner/data.hpp"
#include "htrner/error.hpp"
#include "htrner/eval.hpp"
#include "htrner/image.hpp"
#include "htrner/net.hpp"
#include "htrner/png_io.hpp"
#include "htrner/rng.hpp"
#include "htrner/synth.hpp"
#include "htrner/tag_codec.hpp"
#include "htrner/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace htrner;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string iso_now() {
  const std::time_t t =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
  std::string out_dir;
  std::uint64_t seed = 42;
  SynthConfig config;
};

int cmd_synth(const SynthArgs& a) {
  auto pages = synth_generate(a.seed, a.config);
  write_synth_dataset(pages, a.out_dir);
  std::size_t words = 0;
  for (const auto& p : pages) words += p.manifest.words.size();
  std::cout << "wrote " << pages.size() << " pages, " << words << " words to "
            << a.out_dir << "\n"
            << "test-split out-of-vocabulary fraction: " << std::fixed
            << std::setprecision(4) << oov_fraction(pages) << "\n";
  return 0;
}

// -------------------------------------------------------------- prepare ----

struct PrepareArgs {
  std::string manifest;
  std::string out_dir;
  PrepareOptions options;
};

int cmd_prepare(const PrepareArgs& a) {
  prepare_dataset(a.manifest, a.out_dir, a.options);
  auto ds = load_dataset(a.out_dir);
  std::cout << "prepared " << ds.train.size() << " train / " << ds.valid.size()
            << " valid / " << ds.test.size() << " test samples ("
            << to_string(a.options.level) << " level, "
            << to_string(a.options.scheme) << " scheme, " << ds.symbols.size()
            << " symbols) in " << a.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
  std::string data_dir;
  std::string out_dir;
  std::string scheme;  // assertion against the prepared dataset when given
  std::string level;
  std::string lines_from;     // line-level dataset for the curriculum
  std::string transfer_from;  // checkpoint to fine-tune from
  bool curriculum = false;
  bool resume = false;
  TrainConfig config;

  // Architecture; defaults follow NetworkConfig::reference.
  std::string filters = "16,32,48,64";
  std::string pools = "2x2,2x2,2x1,2x1";
  int lstm_hidden = 256;
  int lstm_layers = 3;
};

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
  std::vector<int> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v <= 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": bad entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

NetworkConfig net_from_args(const TrainArgs& a, int input_height,
                            int num_classes) {
  NetworkConfig net;
  net.input_height = input_height;
  net.num_classes = num_classes;
  net.lstm_hidden = a.lstm_hidden;
  net.lstm_layers = a.lstm_layers;
  const auto filters = parse_int_list(a.filters, "--filters");
  std::vector<std::pair<int, int>> pools;
  {
    std::stringstream ss(a.pools);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto x = item.find('x');
      if (x == std::string::npos)
        throw ConfigError("--pools: bad entry '" + item + "'");
      const auto hw = parse_int_list(item.substr(0, x) + "," + item.substr(x + 1),
                                     "--pools");
      pools.emplace_back(hw[0], hw[1]);
    }
  }
  if (pools.size() != filters.size())
    throw ConfigError("--filters and --pools must have the same length");
  net.conv_blocks.clear();
  for (std::size_t i = 0; i < filters.size(); ++i)
    net.conv_blocks.push_back({filters[i], 3, 3, pools[i].first,
                               pools[i].second});
  validate_config(net);
  return net;
}

json net_to_json(const NetworkConfig& net) {
  json blocks = json::array();
  for (const auto& b : net.conv_blocks)
    blocks.push_back({{"filters", b.filters},
                      {"kernel", {b.kernel_h, b.kernel_w}},
                      {"pool", {b.pool_h, b.pool_w}}});
  return {{"input_height", net.input_height},
          {"conv_blocks", blocks},
          {"lstm_layers", net.lstm_layers},
          {"lstm_hidden", net.lstm_hidden},
          {"num_classes", net.num_classes}};
}

void save_run_manifest(const fs::path& path, const TrainArgs& a,
                       const NetworkConfig& net, const std::string& provenance,
                       const std::string& started_at,
                       const std::string& ended_at, double best_valid_cer) {
  const auto& c = a.config;
  json doc = {
      {"tool", "htrner"},
      {"version", kVersion},
      {"command", "train"},
      {"data_dir", a.data_dir},
      {"out_dir", a.out_dir},
      {"lines_from", a.lines_from},
      {"provenance", provenance},
      {"seed", c.seed},
      {"train",
       {{"lr0", c.lr0},
        {"lr_decay_per_epoch", c.lr_decay_per_epoch},
        {"batch_size", c.batch_size},
        {"adv_weight", c.adv_weight},
        {"adv_epsilon", c.adv_epsilon},
        {"max_epochs", c.max_epochs},
        {"momentum", c.momentum},
        {"clip_norm", c.clip_norm},
        {"early_stop_patience", c.early_stop_patience},
        {"scheme", to_string(c.scheme)},
        {"level", to_string(c.level)},
        {"curriculum", a.curriculum},
        {"deterministic_timing", c.deterministic_timing}}},
      {"network", net_to_json(net)},
      {"started_at", started_at},
      {"ended_at", ended_at},
  };
  if (best_valid_cer >= 0.0) doc["best_valid_cer"] = best_valid_cer;
  write_file(path, doc.dump(2) + "\n");
}

int cmd_train(TrainArgs& a) {
  auto ds = load_dataset(a.data_dir);
  if (!a.scheme.empty() && scheme_from_string(a.scheme) != ds.options.scheme)
    throw ConfigError("--scheme " + a.scheme + " does not match the dataset (" +
                      to_string(ds.options.scheme) + ")");
  if (!a.level.empty() && level_from_string(a.level) != ds.options.level)
    throw ConfigError("--level " + a.level + " does not match the dataset (" +
                      to_string(ds.options.level) + ")");
  a.config.scheme = ds.options.scheme;
  a.config.level = ds.options.level;
  a.config.curriculum =
      a.curriculum ? Curriculum::lines_then_records : Curriculum::off;
  validate_train_config(a.config);

  LoadedDataset lines;
  if (a.curriculum) {
    if (ds.options.level != SampleLevel::record)
      throw ConfigError("--curriculum expects a record-level dataset");
    if (a.lines_from.empty())
      throw ConfigError("--curriculum requires --lines-from");
    if (a.resume)
      throw ConfigError("--resume is not supported with --curriculum");
    lines = load_dataset(a.lines_from);
    if (lines.options.level != SampleLevel::line)
      throw ConfigError("--lines-from must point at a line-level dataset");
    if (lines.options.scheme != ds.options.scheme)
      throw ConfigError("curriculum phases use different tag schemes");
    if (!(lines.symbols == ds.symbols))
      throw ConfigError("curriculum phases use different symbol tables");
  }

  NetworkConfig net =
      net_from_args(a, ds.options.input_height, ds.symbols.size());

  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  const fs::path last_path = out / "last.ckpt";
  const fs::path best_path = out / "best.ckpt";
  const fs::path metrics_path = out / "metrics.csv";

  TrainState state;
  std::string provenance = "scratch";
  std::string phase = to_string(ds.options.level) + "s";
  Rng rng(a.config.seed);

  if (a.resume) {
    if (!fs::exists(last_path))
      throw DataError("--resume: no checkpoint at " + last_path.string());
    Checkpoint last = load_checkpoint(last_path.string());
    check_architecture_compatible(last.config, net);
    if (last.config.num_classes != net.num_classes)
      throw ConfigError("--resume: checkpoint alphabet size differs");
    if (!(last.symbols == ds.symbols))
      throw DataError("--resume: checkpoint symbol table differs");
    state.params = last.params;
    state.velocity = last.velocity;
    state.best_valid_cer = last.best_valid_cer;
    state.best_epoch = last.best_epoch;
    state.next_epoch = last.epoch;
    state.rng = Rng::deserialize(last.rng_state);
    state.best_params = fs::exists(best_path)
                            ? load_checkpoint(best_path.string()).params
                            : last.params;
    provenance = last.provenance;
    phase = last.phase;
  } else if (!a.transfer_from.empty()) {
    Checkpoint source = load_checkpoint(a.transfer_from);
    check_architecture_compatible(source.config, net);
    state.params = transfer_init(source, ds.symbols, rng.next());
    state.rng = rng;
    provenance = "transfer:" + a.transfer_from;
  } else {
    state.params = init_params(net, rng);
    state.rng = rng;
  }

  const std::string started_at = iso_now();
  save_run_manifest(out / "run_manifest.json", a, net, provenance, started_at,
                    "", -1.0);

  // On resume the old rows become a verbatim prefix, so the finished file
  // is byte-identical to an uninterrupted run's. Rewritten per epoch to
  // keep the log current while training.
  std::string metrics_prefix;
  if (a.resume && fs::exists(metrics_path)) {
    std::ifstream in(metrics_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    metrics_prefix = ss.str();
  }
  MetricsLog log;
  const auto write_metrics = [&] {
    const std::string csv = log.to_csv();
    if (metrics_prefix.empty()) {
      write_file(metrics_path, csv);
    } else {
      write_file(metrics_path,
                 metrics_prefix + csv.substr(csv.find('\n') + 1));
    }
  };

  Checkpoint ck;
  ck.config = net;
  ck.symbols = ds.symbols;
  ck.provenance = provenance;
  const auto hook = [&](const TrainState& s, int epoch, bool improved) {
    ck.params = s.params;
    ck.velocity = s.velocity;
    ck.epoch = epoch + 1;
    ck.best_valid_cer = s.best_valid_cer;
    ck.best_epoch = s.best_epoch;
    ck.rng_state = s.rng.serialize();
    ck.phase = log.rows.empty() ? phase : log.rows.back().phase;
    save_checkpoint(last_path.string(), ck);
    if (improved) {
      Checkpoint best = ck;
      best.params = s.best_params;
      save_checkpoint(best_path.string(), best);
    }
    write_metrics();
  };

  if (a.curriculum) {
    run_curriculum(state, net, a.config, lines.train, lines.valid, ds.train,
                   ds.valid, log, hook);
  } else {
    run_phase(state, net, a.config, ds.train, ds.valid, phase, log, hook);
  }

  write_metrics();
  save_run_manifest(out / "run_manifest.json", a, net, provenance, started_at,
                    iso_now(), state.best_valid_cer);

  std::cout << "trained " << log.rows.size() << " epochs; best validation CER "
            << std::fixed << std::setprecision(2) << state.best_valid_cer
            << "% at epoch " << state.best_epoch << "\n"
            << "checkpoints: " << best_path.string() << ", "
            << last_path.string() << "\n"
            << "metrics: " << metrics_path.string() << "\n";
  return 0;
}

// --------------------------------------------------------------- decode ----

struct DecodeArgs {
  std::string ckpt;
  std::vector<std::string> inputs;
  std::string out;
  std::string scheme;  // assertion against the checkpoint when given
};

json record_to_json(const std::string& id, const AnnotatedRecord& record) {
  json words = json::array();
  for (const auto& w : record.words)
    words.push_back({{"transcript", w.transcript},
                     {"category", to_string(w.category)},
                     {"person", to_string(w.person)}});
  return {{"id", id}, {"words", words}};
}

int cmd_decode(const DecodeArgs& a) {
  Checkpoint ck = load_checkpoint(a.ckpt);
  if (!a.scheme.empty() &&
      scheme_from_string(a.scheme) != ck.symbols.scheme())
    throw ConfigError("--scheme " + a.scheme +
                      " does not match the checkpoint (" +
                      to_string(ck.symbols.scheme()) + ")");

  std::vector<fs::path> images;
  for (const auto& input : a.inputs) {
    fs::path p(input);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".png")
          found.push_back(e.path());
      std::sort(found.begin(), found.end());
      images.insert(images.end(), found.begin(), found.end());
    } else {
      images.push_back(p);
    }
  }
  if (images.empty()) throw DataError("decode: no input images");

  std::ostringstream lines;
  for (const auto& path : images) {
    const GrayImage img =
        normalize_height(read_png(path.string()), ck.config.input_height);
    const auto fwd = net_forward(img, ck.params, ck.config, NetMode::eval,
                                 false);
    const auto indices = best_path_decode(fwd.log_probs);
    const AnnotatedRecord record =
        decode(indices, ck.symbols.scheme(), ck.symbols, DecodeMode::repair);
    lines << record_to_json(path.stem().string(), record).dump() << "\n";
  }
  if (a.out.empty()) {
    std::cout << lines.str();
  } else {
    write_file(a.out, lines.str());
  }
  return 0;
}

// ------------------------------------------------------------- evaluate ----

struct EvaluateArgs {
  std::string gt_manifest;
  std::string predictions;
  std::string track = "both";
  std::string split = "all";
  std::string out;
  ScoreOptions options;
};

struct GtRecord {
  AnnotatedRecord words;
  std::vector<std::string> line_ids;  // reading order
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto pages = load_manifest(a.gt_manifest);
  std::vector<std::string> order;
  std::map<std::string, GtRecord> records;
  for (const auto& page : pages) {
    if (a.split != "all" && page.split != split_from_string(a.split)) continue;
    for (const auto& line : group_lines(page)) {
      auto [it, inserted] = records.try_emplace(line.record_id);
      if (inserted) {
        order.push_back(line.record_id);
        it->second.words.record_id = line.record_id;
      }
      it->second.line_ids.push_back(line.line_id);
      for (const auto& w : line.words)
        it->second.words.words.push_back(
            {w.transcript, w.category, w.person});
    }
  }

  std::ifstream in(a.predictions);
  if (!in) throw DataError("cannot open " + a.predictions);
  std::map<std::string, AnnotatedRecord> predictions;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(a.predictions + ":" + std::to_string(line_no) + ": " +
                      e.what());
    }
    AnnotatedRecord rec;
    for (const auto& jw : doc.at("words"))
      rec.words.push_back(
          {jw.at("transcript").get<std::string>(),
           category_from_string(jw.at("category").get<std::string>()),
           person_from_string(jw.at("person").get<std::string>())});
    predictions[doc.at("id").get<std::string>()] = rec;
  }

  // A prediction covers a record either directly by record id or as the
  // concatenation of its line predictions in reading order.
  std::vector<std::pair<std::string, AnnotatedRecord>> aligned;
  int missing = 0;
  for (const auto& id : order) {
    const auto& gt = records.at(id);
    AnnotatedRecord pred;
    if (auto it = predictions.find(id); it != predictions.end()) {
      pred = it->second;
    } else {
      bool any = false;
      for (const auto& line_id : gt.line_ids) {
        auto lit = predictions.find(line_id);
        if (lit == predictions.end()) continue;
        any = true;
        pred.words.insert(pred.words.end(), lit->second.words.begin(),
                          lit->second.words.end());
      }
      if (!any) {
        ++missing;
        std::cerr << "no prediction for record " << id << "; scored 0\n";
      }
    }
    aligned.emplace_back(id, pred);
  }

  std::vector<TrackKind> tracks;
  if (a.track == "both") {
    tracks = {TrackKind::basic, TrackKind::complete};
  } else {
    tracks = {track_from_string(a.track)};
  }

  std::string csv;
  for (auto track : tracks) {
    std::vector<RecordScore> scores;
    double sum = 0.0;
    int counted = 0;
    for (const auto& [id, pred] : aligned) {
      auto rs = score_record(records.at(id).words, pred, track, a.options);
      rs.record_id = id;
      if (rs.has_scorable) {
        sum += rs.score;
        ++counted;
      }
      scores.push_back(std::move(rs));
    }
    const std::string report = score_report_csv(scores, track);
    if (csv.empty()) {
      csv = report;
    } else {
      csv += report.substr(report.find('\n') + 1);  // drop repeated header
    }
    std::cout << to_string(track) << " " << std::fixed << std::setprecision(2)
              << (counted > 0 ? sum / counted : 0.0) << "\n";
  }

  if (a.out.empty()) {
    std::cout << csv;
  } else {
    write_file(a.out, csv);
  }
  if (missing > 0)
    std::cerr << missing << " record(s) had no prediction\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"handwritten text recognition with named entities"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand(
      "synth", "generate a synthetic marriage-record dataset");
  synth->add_option("out_dir", synth_args.out_dir, "output directory")
      ->required();
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--records", synth_args.config.n_records,
                    "number of records");
  synth->add_option("--oov-rate", synth_args.config.oov_rate,
                    "held-out vocabulary rate in the test split");
  synth->add_option("--noise", synth_args.config.noise, "pixel noise sigma");
  synth->add_option("--slant", synth_args.config.slant, "per-word shear sigma");
  synth->add_option("--line-height", synth_args.config.line_height,
                    "nominal line band height");

  PrepareArgs prepare_args;
  auto* prepare = app.add_subcommand(
      "prepare", "extract training samples from a manifest");
  prepare->add_option("manifest", prepare_args.manifest, "manifest JSON path")
      ->required();
  prepare->add_option("out_dir", prepare_args.out_dir, "output directory")
      ->required();
  std::string prep_scheme = "combined", prep_level = "line",
              prep_extraction = "weighted_average";
  prepare->add_option("--scheme", prep_scheme, "tag scheme")
      ->check(CLI::IsMember({"open_close", "single_separate",
                             "change_of_person", "combined"}));
  prepare->add_option("--level", prep_level, "sample granularity")
      ->check(CLI::IsMember({"line", "record"}));
  prepare->add_option("--extraction", prep_extraction, "line crop method")
      ->check(CLI::IsMember({"bbox_union", "weighted_average"}));
  prepare->add_option("--height", prepare_args.options.input_height,
                      "normalized sample height");
  prepare->add_option("--separator-px", prepare_args.options.separator_px,
                      "background columns between record lines");
  prepare->add_flag("--closed-world", prepare_args.options.closed_world,
                    "enumerate every category x person tag");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a recognizer");
  train->add_option("data_dir", train_args.data_dir, "prepared dataset")
      ->required();
  train->add_option("out_dir", train_args.out_dir, "run output directory")
      ->required();
  train->add_option("--scheme", train_args.scheme,
                    "expected dataset tag scheme")
      ->check(CLI::IsMember({"open_close", "single_separate",
                             "change_of_person", "combined"}));
  train->add_option("--level", train_args.level, "expected dataset level")
      ->check(CLI::IsMember({"line", "record"}));
  train->add_flag("--curriculum", train_args.curriculum,
                  "train on lines first, then records");
  train->add_option("--lines-from", train_args.lines_from,
                    "line-level dataset for the curriculum phase");
  train->add_option("--transfer-from", train_args.transfer_from,
                    "checkpoint to fine-tune from");
  train->add_flag("--resume", train_args.resume,
                  "continue from out_dir/last.ckpt");
  train->add_option("--lr", train_args.config.lr0, "initial learning rate");
  train->add_option("--lr-decay", train_args.config.lr_decay_per_epoch,
                    "multiplicative decay per epoch");
  train->add_option("--batch", train_args.config.batch_size, "batch size");
  train->add_option("--adv-weight", train_args.config.adv_weight,
                    "adversarial term weight");
  train->add_option("--adv-epsilon", train_args.config.adv_epsilon,
                    "sign-perturbation magnitude");
  train->add_option("--momentum", train_args.config.momentum,
                    "SGD momentum (0 = plain)");
  train->add_option("--clip-norm", train_args.config.clip_norm,
                    "global gradient norm cap (<= 0 disables)");
  train->add_option("--patience", train_args.config.early_stop_patience,
                    "early-stop patience in epochs (<= 0 disables)");
  train->add_option("--seed", train_args.config.seed, "training seed");
  train->add_option("--max-epochs", train_args.config.max_epochs,
                    "epoch cap per phase");
  train->add_flag("--deterministic-timing",
                  train_args.config.deterministic_timing,
                  "write 0 in the seconds column");
  train->add_option("--filters", train_args.filters,
                    "conv filters per block, comma separated");
  train->add_option("--pools", train_args.pools,
                    "pool sizes per block, HxW comma separated");
  train->add_option("--hidden", train_args.lstm_hidden, "LSTM hidden size");
  train->add_option("--lstm-layers", train_args.lstm_layers,
                    "stacked BLSTM layers");

  DecodeArgs decode_args;
  auto* dec = app.add_subcommand("decode", "transcribe and tag images");
  dec->add_option("ckpt", decode_args.ckpt, "checkpoint path")->required();
  dec->add_option("inputs", decode_args.inputs,
                  "PNG files or directories of PNGs")
      ->required();
  dec->add_option("--out", decode_args.out,
                  "output file (default standard output)");
  dec->add_option("--scheme", decode_args.scheme,
                  "expected checkpoint tag scheme")
      ->check(CLI::IsMember({"open_close", "single_separate",
                             "change_of_person", "combined"}));

  EvaluateArgs eval_args;
  auto* ev = app.add_subcommand("evaluate",
                                "score predictions against a manifest");
  ev->add_option("gt_manifest", eval_args.gt_manifest,
                 "ground-truth manifest JSON")
      ->required();
  ev->add_option("predictions", eval_args.predictions,
                 "line-delimited JSON from decode")
      ->required();
  ev->add_option("--track", eval_args.track, "scoring track")
      ->check(CLI::IsMember({"basic", "complete", "both"}));
  ev->add_option("--split", eval_args.split, "restrict scoring to one split")
      ->check(CLI::IsMember({"train", "valid", "test", "all"}));
  ev->add_option("--out", eval_args.out,
                 "per-record CSV file (default standard output)");
  ev->add_flag("--score-all-words", eval_args.options.score_all_words,
               "score every word, not only entity words");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (prepare->parsed()) {
      prepare_args.options.scheme = scheme_from_string(prep_scheme);
      prepare_args.options.level = level_from_string(prep_level);
      prepare_args.options.extraction =
          extraction_from_string(prep_extraction);
      return cmd_prepare(prepare_args);
    }
    if (train->parsed()) return cmd_train(train_args);
    if (dec->parsed()) return cmd_decode(decode_args);
    if (ev->parsed()) return cmd_evaluate(eval_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {  // DataError, CodecError
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
