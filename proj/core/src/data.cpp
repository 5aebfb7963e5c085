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

#include "htrner/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "json.hpp"

#include "htrner/error.hpp"
#include "htrner/png_io.hpp"

namespace htrner {

namespace fs = std::filesystem;
using nlohmann::json;

const std::string& to_string(SplitTag s) {
  static const std::string names[] = {"train", "valid", "test"};
  return names[static_cast<int>(s)];
}

SplitTag split_from_string(const std::string& name) {
  if (name == "train") return SplitTag::train;
  if (name == "valid") return SplitTag::valid;
  if (name == "test") return SplitTag::test;
  throw DataError("unknown split: " + name);
}

const std::string& to_string(ExtractionMethod m) {
  static const std::string names[] = {"bbox_union", "weighted_average"};
  return names[static_cast<int>(m)];
}

ExtractionMethod extraction_from_string(const std::string& name) {
  if (name == "bbox_union") return ExtractionMethod::bbox_union;
  if (name == "weighted_average") return ExtractionMethod::weighted_average;
  throw ConfigError("unknown extraction method: " + name);
}

const std::string& to_string(SampleLevel l) {
  static const std::string names[] = {"line", "record"};
  return names[static_cast<int>(l)];
}

SampleLevel level_from_string(const std::string& name) {
  if (name == "line") return SampleLevel::line;
  if (name == "record") return SampleLevel::record;
  throw ConfigError("unknown sample level: " + name);
}

namespace {

json word_to_json(const WordBox& w) {
  return json{{"x", w.x},
              {"y", w.y},
              {"w", w.w},
              {"h", w.h},
              {"transcript", w.transcript},
              {"category", to_string(w.category)},
              {"person", to_string(w.person)},
              {"line_id", w.line_id},
              {"record_id", w.record_id}};
}

WordBox word_from_json(const json& j) {
  WordBox w;
  w.x = j.at("x").get<int>();
  w.y = j.at("y").get<int>();
  w.w = j.at("w").get<int>();
  w.h = j.at("h").get<int>();
  w.transcript = j.at("transcript").get<std::string>();
  w.category = category_from_string(j.at("category").get<std::string>());
  w.person = person_from_string(j.at("person").get<std::string>());
  w.line_id = j.at("line_id").get<std::string>();
  w.record_id = j.at("record_id").get<std::string>();
  if (w.w <= 0 || w.h <= 0)
    throw DataError("manifest: non-positive box for word '" + w.transcript +
                    "'");
  return w;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace

std::vector<PageManifest> load_manifest(const std::string& path) {
  const json j = read_json_file(path);
  if (!j.contains("pages") || !j.at("pages").is_array())
    throw DataError("manifest: missing pages array in " + path);
  std::vector<PageManifest> pages;
  for (const json& jp : j.at("pages")) {
    PageManifest p;
    p.image = jp.at("image").get<std::string>();
    p.split = split_from_string(jp.at("split").get<std::string>());
    for (const json& jw : jp.at("words")) p.words.push_back(word_from_json(jw));
    pages.push_back(std::move(p));
  }
  return pages;
}

void save_manifest(const std::string& path,
                   const std::vector<PageManifest>& pages) {
  json out;
  out["pages"] = json::array();
  for (const PageManifest& p : pages) {
    json jp;
    jp["image"] = p.image;
    jp["split"] = to_string(p.split);
    jp["words"] = json::array();
    for (const WordBox& w : p.words) jp["words"].push_back(word_to_json(w));
    out["pages"].push_back(std::move(jp));
  }
  write_text_file(path, out.dump(2) + "\n");
}

GrayImage extract_line(const GrayImage& page, const std::vector<WordBox>& words,
                       ExtractionMethod method) {
  if (words.empty()) throw DataError("extract_line: no words");
  const std::string& line_id = words.front().line_id;
  long weight_sum = 0;
  double top_acc = 0.0, bottom_acc = 0.0;
  int left = words.front().x, right = 0, top_min = words.front().y,
      bottom_max = 0;
  for (const WordBox& w : words) {
    if (w.line_id != line_id)
      throw DataError("extract_line: words from different lines");
    if (w.x < 0 || w.y < 0 || w.x + w.w > page.width() ||
        w.y + w.h > page.height())
      throw DataError("extract_line: box outside page");
    left = std::min(left, w.x);
    right = std::max(right, w.x + w.w);
    top_min = std::min(top_min, w.y);
    bottom_max = std::max(bottom_max, w.y + w.h);
    weight_sum += w.w;
    top_acc += static_cast<double>(w.w) * w.y;
    bottom_acc += static_cast<double>(w.w) * (w.y + w.h);
  }

  int top = top_min, bottom = bottom_max;
  if (method == ExtractionMethod::weighted_average) {
    // Floor/ceil so the averaged band never loses a partial pixel row.
    top = static_cast<int>(std::floor(top_acc / weight_sum));
    bottom = static_cast<int>(std::ceil(bottom_acc / weight_sum));
    top = std::clamp(top, 0, page.height() - 1);
    bottom = std::clamp(bottom, top + 1, page.height());
  }
  return crop(page, top, left, bottom - top, right - left);
}

std::vector<LineGroup> group_lines(const PageManifest& page) {
  std::vector<LineGroup> groups;
  for (const WordBox& w : page.words) {
    if (groups.empty() || groups.back().line_id != w.line_id) {
      if (!groups.empty()) {
        // A line_id reappearing after another line means the manifest is
        // not in reading order.
        for (const LineGroup& g : groups)
          if (g.line_id == w.line_id)
            throw DataError("manifest: line " + w.line_id +
                            " is not contiguous");
      }
      groups.push_back({w.line_id, w.record_id, {}});
    }
    if (groups.back().record_id != w.record_id)
      throw DataError("manifest: line " + w.line_id +
                      " spans multiple records");
    groups.back().words.push_back(w);
  }
  return groups;
}

namespace {

AnnotatedWord annotated(const WordBox& w) {
  return AnnotatedWord{w.transcript, w.category, w.person};
}

struct PreparedSample {
  std::string id;
  std::string record_id;
  SplitTag split = SplitTag::train;
  GrayImage image;
  AnnotatedRecord words;
};

json sample_sidecar(const PreparedSample& s) {
  json words = json::array();
  for (const AnnotatedWord& w : s.words.words)
    words.push_back(json{{"transcript", w.transcript},
                         {"category", to_string(w.category)},
                         {"person", to_string(w.person)}});
  return json{{"id", s.id}, {"record_id", s.record_id}, {"words", words}};
}

}  // namespace

void prepare_dataset(const std::string& manifest_path,
                     const std::string& out_dir,
                     const PrepareOptions& options) {
  if (options.input_height <= 0)
    throw ConfigError("prepare: input_height must be positive");
  if (options.separator_px < 0)
    throw ConfigError("prepare: separator_px must be non-negative");

  const std::vector<PageManifest> pages = load_manifest(manifest_path);
  if (pages.empty()) throw DataError("prepare: empty manifest");
  const fs::path base = fs::path(manifest_path).parent_path();

  // Symbol table covers every split so held-out test words stay encodable;
  // they share the training alphabet by construction.
  std::vector<AnnotatedRecord> all_records;
  for (const PageManifest& page : pages) {
    std::map<std::string, std::size_t> index;
    for (const WordBox& w : page.words) {
      auto [it, inserted] =
          index.try_emplace(w.record_id, all_records.size());
      if (inserted) all_records.push_back(AnnotatedRecord{{}, w.record_id});
      all_records[it->second].words.push_back(annotated(w));
    }
  }
  CodecOptions codec_options;
  codec_options.closed_world = options.closed_world;
  const SymbolTable symbols =
      build_symbol_table(all_records, options.scheme, codec_options);

  std::vector<PreparedSample> samples;
  for (const PageManifest& page : pages) {
    const GrayImage page_image =
        read_png((base / page.image).string());
    const std::vector<LineGroup> lines = group_lines(page);

    if (options.level == SampleLevel::line) {
      for (const LineGroup& line : lines) {
        PreparedSample s;
        s.id = line.line_id;
        s.record_id = line.record_id;
        s.split = page.split;
        s.image = normalize_height(
            extract_line(page_image, line.words, options.extraction),
            options.input_height);
        for (const WordBox& w : line.words)
          s.words.words.push_back(annotated(w));
        s.words.record_id = line.record_id;
        samples.push_back(std::move(s));
      }
    } else {
      // Group consecutive lines per record, preserving reading order.
      std::map<std::string, std::size_t> index;
      std::vector<std::vector<const LineGroup*>> records;
      std::vector<std::string> record_order;
      for (const LineGroup& line : lines) {
        auto [it, inserted] = index.try_emplace(line.record_id, records.size());
        if (inserted) {
          records.emplace_back();
          record_order.push_back(line.record_id);
        }
        records[it->second].push_back(&line);
      }
      for (std::size_t i = 0; i < records.size(); ++i) {
        PreparedSample s;
        s.id = record_order[i];
        s.record_id = record_order[i];
        s.split = page.split;
        std::vector<GrayImage> line_images;
        for (const LineGroup* line : records[i]) {
          line_images.push_back(normalize_height(
              extract_line(page_image, line->words, options.extraction),
              options.input_height));
          for (const WordBox& w : line->words)
            s.words.words.push_back(annotated(w));
        }
        s.image = concat_images(line_images, options.separator_px);
        s.words.record_id = s.record_id;
        samples.push_back(std::move(s));
      }
    }
  }

  fs::create_directories(out_dir);
  for (SplitTag split : {SplitTag::train, SplitTag::valid, SplitTag::test})
    fs::create_directories(fs::path(out_dir) / to_string(split));

  json split_index = {{"train", json::array()},
                      {"valid", json::array()},
                      {"test", json::array()}};
  std::map<SplitTag, std::string> target_lines;
  for (const PreparedSample& s : samples) {
    const fs::path dir = fs::path(out_dir) / to_string(s.split);
    write_png((dir / (s.id + ".png")).string(), s.image);
    write_text_file((dir / (s.id + ".json")).string(),
                    sample_sidecar(s).dump(2) + "\n");
    split_index[to_string(s.split)].push_back(s.id);

    const std::vector<int> target = encode(s.words, options.scheme, symbols);
    std::string& lines = target_lines[s.split];
    lines += s.id;
    lines += '\t';
    for (std::size_t i = 0; i < target.size(); ++i) {
      if (i > 0) lines += ' ';
      lines += symbols.surface(target[i]);
    }
    lines += '\n';
  }
  for (SplitTag split : {SplitTag::train, SplitTag::valid, SplitTag::test})
    write_text_file(
        (fs::path(out_dir) / to_string(split) / "targets.txt").string(),
        target_lines[split]);

  symbols.save((fs::path(out_dir) / "symbols.txt").string());
  json meta = {{"scheme", to_string(options.scheme)},
               {"level", to_string(options.level)},
               {"extraction", to_string(options.extraction)},
               {"input_height", options.input_height},
               {"separator_px", options.separator_px},
               {"closed_world", options.closed_world},
               {"splits", split_index}};
  write_text_file((fs::path(out_dir) / "meta.json").string(),
                  meta.dump(2) + "\n");
}

namespace {

PrepareOptions options_from_meta(const json& meta) {
  PrepareOptions o;
  o.scheme = scheme_from_string(meta.at("scheme").get<std::string>());
  o.level = level_from_string(meta.at("level").get<std::string>());
  o.extraction =
      extraction_from_string(meta.at("extraction").get<std::string>());
  o.input_height = meta.at("input_height").get<int>();
  o.separator_px = meta.at("separator_px").get<int>();
  o.closed_world = meta.at("closed_world").get<bool>();
  return o;
}

std::vector<LoadedSample> load_split_impl(const fs::path& dir,
                                          const json& meta,
                                          const SymbolTable& symbols,
                                          TagScheme scheme, SplitTag split) {
  std::vector<LoadedSample> out;
  for (const json& jid : meta.at("splits").at(to_string(split))) {
    const std::string id = jid.get<std::string>();
    const fs::path split_dir = dir / to_string(split);
    LoadedSample s;
    s.id = id;
    s.image = read_png((split_dir / (id + ".png")).string());
    const json side = read_json_file((split_dir / (id + ".json")).string());
    s.record_id = side.at("record_id").get<std::string>();
    s.words.record_id = s.record_id;
    for (const json& jw : side.at("words"))
      s.words.words.push_back(AnnotatedWord{
          jw.at("transcript").get<std::string>(),
          category_from_string(jw.at("category").get<std::string>()),
          person_from_string(jw.at("person").get<std::string>())});
    s.target = encode(s.words, scheme, symbols);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<LoadedSample> load_split(const std::string& dir, SplitTag split) {
  const fs::path base(dir);
  const json meta = read_json_file((base / "meta.json").string());
  const PrepareOptions options = options_from_meta(meta);
  const SymbolTable symbols =
      SymbolTable::load((base / "symbols.txt").string(), options.scheme);
  return load_split_impl(base, meta, symbols, options.scheme, split);
}

LoadedDataset load_dataset(const std::string& dir) {
  const fs::path base(dir);
  const json meta = read_json_file((base / "meta.json").string());
  LoadedDataset d;
  d.options = options_from_meta(meta);
  d.symbols = SymbolTable::load((base / "symbols.txt").string(),
                                d.options.scheme);
  d.train = load_split_impl(base, meta, d.symbols, d.options.scheme,
                            SplitTag::train);
  d.valid = load_split_impl(base, meta, d.symbols, d.options.scheme,
                            SplitTag::valid);
  d.test = load_split_impl(base, meta, d.symbols, d.options.scheme,
                           SplitTag::test);
  return d;
}

}  // namespace htrner
