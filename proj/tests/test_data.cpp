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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "htrner/data.hpp"
#include "htrner/error.hpp"
#include "htrner/rng.hpp"
#include "htrner/synth.hpp"
#include "htrner/tag_codec.hpp"

using namespace htrner;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("htrner_data_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Every pixel encodes its own coordinates, so a crop betrays its origin.
GrayImage coordinate_page(int h, int w) {
  GrayImage page(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) page.at(r, c) = r + c / 1000.0;
  return page;
}

WordBox box(int x, int y, int w, int h, const std::string& line = "l0",
            const std::string& rec = "r0") {
  WordBox b;
  b.x = x;
  b.y = y;
  b.w = w;
  b.h = h;
  b.transcript = "w";
  b.line_id = line;
  b.record_id = rec;
  return b;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("enum names round-trip") {
  for (auto s : {SplitTag::train, SplitTag::valid, SplitTag::test})
    CHECK(split_from_string(to_string(s)) == s);
  for (auto m : {ExtractionMethod::bbox_union, ExtractionMethod::weighted_average})
    CHECK(extraction_from_string(to_string(m)) == m);
  for (auto l : {SampleLevel::line, SampleLevel::record})
    CHECK(level_from_string(to_string(l)) == l);
  CHECK(to_string(ExtractionMethod::bbox_union) == "bbox_union");
  CHECK(to_string(ExtractionMethod::weighted_average) == "weighted_average");
  // Split tags arrive in manifests; extraction and level arrive in options.
  CHECK_THROWS_AS(split_from_string("dev"), DataError);
  CHECK_THROWS_AS(extraction_from_string(""), ConfigError);
  CHECK_THROWS_AS(level_from_string("page"), ConfigError);
}

TEST_CASE("manifest save and load round-trip") {
  auto dir = temp_dir("manifest");
  std::vector<PageManifest> pages(2);
  pages[0].image = "pages/a.png";
  pages[0].split = SplitTag::train;
  WordBox w = box(3, 4, 20, 10, "line_a", "rec_a");
  w.transcript = "Marià";
  w.category = SemanticCategory::name;
  w.person = PersonRole::husband;
  pages[0].words = {w, box(30, 4, 8, 10, "line_a", "rec_a")};
  pages[1].image = "pages/b.png";
  pages[1].split = SplitTag::test;
  pages[1].words = {box(0, 0, 5, 5, "line_b", "rec_b")};

  const auto path = (dir / "manifest.json").string();
  save_manifest(path, pages);
  auto loaded = load_manifest(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].image == "pages/a.png");
  CHECK(loaded[0].split == SplitTag::train);
  REQUIRE(loaded[0].words.size() == 2);
  CHECK(loaded[0].words[0].transcript == "Marià");
  CHECK(loaded[0].words[0].category == SemanticCategory::name);
  CHECK(loaded[0].words[0].person == PersonRole::husband);
  CHECK(loaded[0].words[0].x == 3);
  CHECK(loaded[0].words[0].h == 10);
  CHECK(loaded[0].words[1].category == SemanticCategory::other);
  CHECK(loaded[0].words[1].person == PersonRole::none);
  CHECK(loaded[1].split == SplitTag::test);
  CHECK(loaded[1].words[0].record_id == "rec_b");

  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_manifest((dir / "nope.json").string()), DataError);
  }
  SUBCASE("malformed file") {
    std::ofstream((dir / "bad.json")) << "{pages: oops";
    CHECK_THROWS_AS(load_manifest((dir / "bad.json").string()), DataError);
  }
}

TEST_CASE("line extraction") {
  auto page = coordinate_page(40, 60);

  SUBCASE("single word is its own box under both methods") {
    std::vector<WordBox> words = {box(12, 5, 10, 20)};
    for (auto m : {ExtractionMethod::bbox_union,
                   ExtractionMethod::weighted_average}) {
      auto img = extract_line(page, words, m);
      CHECK(img.height() == 20);
      CHECK(img.width() == 10);
      CHECK(img.at(0, 0) == doctest::Approx(5 + 12 / 1000.0));
    }
  }

  // Widths 10 and 30, tops 5 and 9: weighted top lands exactly on 8.
  SUBCASE("width-weighted vertical limits") {
    std::vector<WordBox> words = {box(0, 5, 10, 20), box(15, 9, 30, 20)};
    auto weighted =
        extract_line(page, words, ExtractionMethod::weighted_average);
    // bottoms 25 and 29 -> weighted bottom 28; x-range [0, 45).
    CHECK(weighted.height() == 28 - 8);
    CHECK(weighted.width() == 45);
    CHECK(weighted.at(0, 0) == doctest::Approx(8.0));

    auto uni = extract_line(page, words, ExtractionMethod::bbox_union);
    CHECK(uni.height() == 29 - 5);
    CHECK(uni.width() == 45);
    CHECK(uni.at(0, 0) == doctest::Approx(5.0));
  }

  SUBCASE("fractional limits floor the top and ceil the bottom") {
    std::vector<WordBox> words = {box(0, 5, 10, 20), box(15, 10, 30, 20)};
    // top (50+300)/40 = 8.75 -> 8; bottom (250+900)/40 = 28.75 -> 29.
    auto img = extract_line(page, words, ExtractionMethod::weighted_average);
    CHECK(img.height() == 29 - 8);
    CHECK(img.at(0, 0) == doctest::Approx(8.0));
  }

  SUBCASE("weighted limits stay within the union limits") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(4));
      std::vector<WordBox> words;
      int x = static_cast<int>(rng.below(4));
      for (int i = 0; i < n; ++i) {
        const int w = 2 + static_cast<int>(rng.below(12));
        const int top = static_cast<int>(rng.below(20));
        const int h = 4 + static_cast<int>(rng.below(40 - top - 4));
        words.push_back(box(x, top, w, h));
        x += w + static_cast<int>(rng.below(3));
      }
      REQUIRE(x <= 60);
      auto uni = extract_line(page, words, ExtractionMethod::bbox_union);
      auto wavg =
          extract_line(page, words, ExtractionMethod::weighted_average);
      CHECK(wavg.width() == uni.width());
      CHECK(wavg.height() <= uni.height());
      // The first pixel row's integer part is the crop's top coordinate.
      CHECK(wavg.at(0, 0) >= uni.at(0, 0));
    }
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS(extract_line(page, {}, ExtractionMethod::bbox_union),
                    DataError);
    CHECK_THROWS_AS(
        extract_line(page, {box(50, 0, 20, 10)}, ExtractionMethod::bbox_union),
        DataError);
    CHECK_THROWS_AS(
        extract_line(page, {box(0, 30, 10, 20)}, ExtractionMethod::bbox_union),
        DataError);
  }
}

TEST_CASE("line grouping follows consecutive runs") {
  PageManifest page;
  page.words = {box(0, 0, 5, 5, "l1", "r1"), box(6, 0, 5, 5, "l1", "r1"),
                box(0, 8, 5, 5, "l2", "r1"), box(0, 16, 5, 5, "l3", "r2")};
  auto groups = group_lines(page);
  REQUIRE(groups.size() == 3);
  CHECK(groups[0].line_id == "l1");
  CHECK(groups[0].words.size() == 2);
  CHECK(groups[0].record_id == "r1");
  CHECK(groups[0].words[1].x == 6);
  CHECK(groups[1].line_id == "l2");
  CHECK(groups[2].line_id == "l3");
  CHECK(groups[2].record_id == "r2");

  SUBCASE("a line id may not reappear after a break") {
    page.words.push_back(box(6, 0, 5, 5, "l1", "r1"));
    CHECK_THROWS_AS(group_lines(page), DataError);
  }
}

TEST_CASE("prepared datasets load back consistently") {
  auto raw = temp_dir("raw");
  SynthConfig cfg;
  cfg.n_records = 8;
  auto pages = synth_generate(11, cfg);
  REQUIRE(pages.size() == 8);
  write_synth_dataset(pages, raw.string());
  const auto manifest_path = (raw / "manifest.json").string();
  auto manifest = load_manifest(manifest_path);
  REQUIRE(manifest.size() == 8);

  PrepareOptions opt;
  opt.scheme = TagScheme::combined;
  opt.level = SampleLevel::line;
  opt.extraction = ExtractionMethod::weighted_average;
  opt.input_height = 32;

  SUBCASE("line level") {
    auto out = temp_dir("prep_line");
    prepare_dataset(manifest_path, out.string(), opt);
    auto ds = load_dataset(out.string());
    CHECK(ds.options.scheme == opt.scheme);
    CHECK(ds.options.level == opt.level);
    CHECK(ds.options.extraction == opt.extraction);
    CHECK(ds.options.input_height == 32);

    std::size_t line_total = 0;
    for (const auto& p : manifest) line_total += group_lines(p).size();
    CHECK(ds.train.size() + ds.valid.size() + ds.test.size() == line_total);
    CHECK(!ds.train.empty());
    CHECK(!ds.test.empty());

    for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
      for (const auto& s : *split) {
        CHECK(s.image.height() == 32);
        CHECK(s.image.width() >= 1);
        CHECK(!s.target.empty());
        // Targets must decode without repair and agree with the stored
        // annotation, modulo what the scheme can express.
        auto decoded =
            decode(s.target, opt.scheme, ds.symbols, DecodeMode::strict);
        CHECK(decoded == normalize_record(s.words, opt.scheme));
      }
    }

    // Cross-check one sample against the manifest itself.
    auto first_line = group_lines(manifest[0])[0];
    AnnotatedRecord want;
    for (const auto& w : first_line.words)
      want.words.push_back({w.transcript, w.category, w.person});
    bool found = false;
    for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
      for (const auto& s : *split) {
        if (s.id != first_line.line_id) continue;
        found = true;
        CHECK(s.record_id == first_line.record_id);
        CHECK(s.target == encode(want, opt.scheme, ds.symbols));
      }
    }
    CHECK(found);

    SUBCASE("split loading preserves index order") {
      auto tr = load_split(out.string(), SplitTag::train);
      REQUIRE(tr.size() == ds.train.size());
      for (std::size_t i = 0; i < tr.size(); ++i) {
        CHECK(tr[i].id == ds.train[i].id);
        CHECK(tr[i].target == ds.train[i].target);
      }
    }
  }

  SUBCASE("record level concatenates lines into one sample") {
    opt.level = SampleLevel::record;
    auto out = temp_dir("prep_rec");
    prepare_dataset(manifest_path, out.string(), opt);
    auto ds = load_dataset(out.string());
    CHECK(ds.train.size() + ds.valid.size() + ds.test.size() == 8);
    for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
      for (const auto& s : *split) {
        CHECK(s.id == s.record_id);
        CHECK(s.image.height() == 32);
      }
    }
    // A record target is the encoding of all its words in reading order:
    // line joins become ordinary word gaps.
    auto groups = group_lines(manifest[0]);
    AnnotatedRecord want;
    for (const auto& g : groups)
      for (const auto& w : g.words)
        want.words.push_back({w.transcript, w.category, w.person});
    bool found = false;
    for (const auto* split : {&ds.train, &ds.valid, &ds.test}) {
      for (const auto& s : *split) {
        if (s.id != groups[0].record_id) continue;
        found = true;
        CHECK(s.target == encode(want, opt.scheme, ds.symbols));
        // Wider than any single line: all three lines plus separators.
        CHECK(s.image.width() > ds.options.separator_px * 2);
      }
    }
    CHECK(found);
  }

  SUBCASE("preparation is deterministic") {
    auto out1 = temp_dir("prep_d1");
    auto out2 = temp_dir("prep_d2");
    prepare_dataset(manifest_path, out1.string(), opt);
    prepare_dataset(manifest_path, out2.string(), opt);
    CHECK(read_bytes(out1 / "meta.json") == read_bytes(out2 / "meta.json"));
    CHECK(read_bytes(out1 / "symbols.txt") == read_bytes(out2 / "symbols.txt"));
    // Sample payloads too, via the recursive directory listing.
    std::vector<fs::path> rel;
    for (auto& e : fs::recursive_directory_iterator(out1))
      if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), out1));
    std::sort(rel.begin(), rel.end());
    CHECK(rel.size() > 4);
    for (const auto& r : rel) CHECK(read_bytes(out1 / r) == read_bytes(out2 / r));
  }

  SUBCASE("readable targets mirror the encoded ones") {
    auto out = temp_dir("prep_targets");
    prepare_dataset(manifest_path, out.string(), opt);
    auto ds = load_dataset(out.string());
    std::ifstream in(out / "train" / "targets.txt");
    REQUIRE(in.good());
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      REQUIRE(row < ds.train.size());
      const auto& s = ds.train[row];
      const auto tab = line.find('\t');
      REQUIRE(tab != std::string::npos);
      CHECK(line.substr(0, tab) == s.id);
      std::string want;
      for (std::size_t i = 0; i < s.target.size(); ++i) {
        if (i > 0) want += ' ';
        want += ds.symbols.surface(s.target[i]);
      }
      CHECK(line.substr(tab + 1) == want);
      ++row;
    }
    CHECK(row == ds.train.size());
    CHECK(fs::exists(out / "valid" / "targets.txt"));
    CHECK(fs::exists(out / "test" / "targets.txt"));
  }

  SUBCASE("symbol table covers every split") {
    auto out = temp_dir("prep_sym");
    prepare_dataset(manifest_path, out.string(), opt);
    auto ds = load_dataset(out.string());
    CHECK(ds.symbols.blank_index() == 0);
    CHECK(ds.symbols.surface(0) == SymbolTable::kBlankSurface);
    CHECK(ds.symbols.find(SymbolTable::kSpaceSurface).has_value());
    // Under the closed-world option the combined alphabet enumerates every
    // category x person pair even if unseen.
    PrepareOptions closed = opt;
    closed.closed_world = true;
    auto out2 = temp_dir("prep_closed");
    prepare_dataset(manifest_path, out2.string(), closed);
    auto ds2 = load_dataset(out2.string());
    CHECK(ds2.symbols.size() >= ds.symbols.size());
    int tags = 0;
    for (int i = 0; i < ds2.symbols.size(); ++i)
      if (ds2.symbols.is_tag(i)) ++tags;
    CHECK(tags == 40);
  }
}

TEST_CASE("loading a missing dataset fails cleanly") {
  CHECK_THROWS_AS(load_dataset("/nonexistent/htrner_ds"), DataError);
}
