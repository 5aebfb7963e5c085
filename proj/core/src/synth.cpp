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

#include "htrner/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "htrner/error.hpp"
#include "htrner/png_io.hpp"
#include "htrner/rng.hpp"
#include "htrner/utf8.hpp"

namespace htrner {

namespace {

// The script is a fixed procedural font: every code point owns a stroke
// skeleton derived from this constant, shared across datasets and seeds so
// models can transfer between generated corpora.
constexpr std::uint64_t kFontSeed = 0x68725f666f6e7431ull;

struct Stroke {
  double x0, y0, x1, y1;  // unit glyph box, y down
};

struct Glyph {
  std::vector<Stroke> strokes;
  double top;     // cell-relative start of the glyph band
  double bottom;  // cell-relative end
};

Glyph glyph_for(char32_t cp) {
  Rng g = Rng::derive(kFontSeed, static_cast<std::uint64_t>(cp));
  Glyph out;
  const bool ascender = g.uniform() < 0.35;
  const bool descender = !ascender && g.uniform() < 0.25;
  out.top = ascender ? 0.06 : 0.30;
  out.bottom = descender ? 0.97 : 0.76;

  auto grid_x = [&] { return static_cast<double>(g.below(3)) / 2.0; };
  auto grid_y = [&] { return static_cast<double>(g.below(4)) / 3.0; };

  // Random walk over a 3x4 lattice keeps the skeleton connected.
  const int segments = 3 + static_cast<int>(g.below(3));
  double x = grid_x(), y = grid_y();
  for (int s = 0; s < segments; ++s) {
    double nx = grid_x(), ny = grid_y();
    int guard = 0;
    while (nx == x && ny == y && guard++ < 8) {
      nx = grid_x();
      ny = grid_y();
    }
    if (nx == x && ny == y) ny = y < 0.5 ? 1.0 : 0.0;
    out.strokes.push_back({x, y, nx, ny});
    x = nx;
    y = ny;
  }
  if (g.uniform() < 0.3) {  // detached bar, diacritic-like
    const double bx = grid_x(), by = grid_y();
    out.strokes.push_back({bx, by, std::min(1.0, bx + 0.5), by});
  }
  return out;
}

double point_segment_distance(double px, double py, const Stroke& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0)
    t = std::clamp(((px - s.x0) * dx + (py - s.y0) * dy) / len2, 0.0, 1.0);
  const double cx = s.x0 + t * dx, cy = s.y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

void draw_stroke(GrayImage& canvas, const Stroke& s, double radius,
                 double strength) {
  const int r0 = std::max(
      0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - radius - 1)));
  const int r1 = std::min(
      canvas.height() - 1,
      static_cast<int>(std::ceil(std::max(s.y0, s.y1) + radius + 1)));
  const int c0 = std::max(
      0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - radius - 1)));
  const int c1 = std::min(
      canvas.width() - 1,
      static_cast<int>(std::ceil(std::max(s.x0, s.x1) + radius + 1)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double d = point_segment_distance(c, r, s);
      const double v = std::clamp(radius + 0.5 - d, 0.0, 1.0) * strength;
      if (v > canvas.at(r, c)) canvas.at(r, c) = v;
    }
  }
}

struct RenderedWord {
  GrayImage canvas;
  int ink_left = 0, ink_top = 0, ink_right = 0, ink_bottom = 0;  // inclusive
};

RenderedWord render_word(const std::string& text, const SynthConfig& config,
                         Rng& rng) {
  const std::vector<char32_t> chars = utf8::decode(text);
  const int cell_h = config.line_height;
  const double glyph_w = cell_h * 0.40 + rng.gauss() * 0.8;
  const double glyph_gap = 1.5 + rng.uniform();
  const double slant = rng.gauss() * config.slant;
  const double baseline = 0.76 * cell_h;

  const int width = static_cast<int>(
      std::ceil(chars.size() * (glyph_w + glyph_gap) +
                cell_h * std::abs(slant) + 8.0));
  RenderedWord out;
  out.canvas = GrayImage(cell_h, std::max(width, 4));

  double x = 3.0;
  for (char32_t cp : chars) {
    const Glyph glyph = glyph_for(cp);
    const double band_top = glyph.top * cell_h;
    const double band_h = (glyph.bottom - glyph.top) * cell_h;
    for (const Stroke& s : glyph.strokes) {
      Stroke px;
      px.x0 = x + s.x0 * glyph_w * 0.82 + rng.gauss() * config.jitter;
      px.y0 = band_top + s.y0 * band_h + rng.gauss() * config.jitter;
      px.x1 = x + s.x1 * glyph_w * 0.82 + rng.gauss() * config.jitter;
      px.y1 = band_top + s.y1 * band_h + rng.gauss() * config.jitter;
      px.x0 += slant * (baseline - px.y0);
      px.x1 += slant * (baseline - px.y1);
      const double radius = config.thickness * (0.85 + 0.3 * rng.uniform());
      const double strength = 0.8 + 0.2 * rng.uniform();
      draw_stroke(out.canvas, px, radius, strength);
    }
    x += glyph_w + glyph_gap;
  }

  // Tight ink bounds, measured before page noise is added.
  int left = out.canvas.width(), right = -1, top = out.canvas.height(),
      bottom = -1;
  for (int r = 0; r < out.canvas.height(); ++r)
    for (int c = 0; c < out.canvas.width(); ++c)
      if (out.canvas.at(r, c) > 0.12) {
        left = std::min(left, c);
        right = std::max(right, c);
        top = std::min(top, r);
        bottom = std::max(bottom, r);
      }
  if (right < 0) {  // degenerate stroke set, claim the body band
    left = 0;
    right = out.canvas.width() - 1;
    top = cell_h / 4;
    bottom = (3 * cell_h) / 4;
  }
  out.ink_left = left;
  out.ink_right = right;
  out.ink_top = top;
  out.ink_bottom = bottom;
  return out;
}

struct Pools {
  std::vector<std::string> main;
  std::vector<std::string> held;
};

Pools split_pool(const std::vector<std::string>& vocab) {
  if (vocab.empty()) throw ConfigError("synth: empty vocabulary");
  std::size_t held = std::max<std::size_t>(1, vocab.size() * 3 / 20);
  if (held >= vocab.size()) held = vocab.size() - 1;
  Pools p;
  p.main.assign(vocab.begin(), vocab.end() - static_cast<long>(held));
  p.held.assign(vocab.end() - static_cast<long>(held), vocab.end());
  if (p.main.empty())
    throw ConfigError("synth: vocabulary too small to hold out words");
  return p;
}

std::string pick(const Pools& pool, Rng& rng, bool allow_held,
                 double oov_rate) {
  if (allow_held && !pool.held.empty() && rng.uniform() < oov_rate)
    return pool.held[rng.below(pool.held.size())];
  return pool.main[rng.below(pool.main.size())];
}

SynthConfig with_default_vocab(SynthConfig config) {
  if (config.names.empty())
    config.names = {"pau",    "joan",  "pere",  "maria", "anna",  "rosa",
                    "jaume",  "marti", "lluis", "clara", "eula",  "teresa",
                    "miquel", "ramon", "nuria", "ines"};
  if (config.surnames.empty())
    config.surnames = {"bara", "baro",  "vila",  "puig", "soler", "serra",
                       "font", "rovira", "sala", "mas",  "riba",  "costa"};
  if (config.occupations.empty())
    config.occupations = {"pages",   "texidor", "fuster", "sastre",
                          "ferrer",  "moliner", "pastor", "barber"};
  if (config.locations.empty())
    config.locations = {"bara",  "vich",   "reus",  "olot",
                        "ripoll", "girona", "manresa", "valls"};
  if (config.states.empty())
    config.states = {"donsella", "viuda", "soltera", "vidua"};
  return config;
}

struct PlannedWord {
  std::string transcript;
  SemanticCategory category = SemanticCategory::other;
  PersonRole person = PersonRole::none;
};

void add(std::vector<PlannedWord>& line, std::string t, SemanticCategory c,
         PersonRole p) {
  line.push_back({std::move(t), c, p});
}

// Three-line marriage entry: husband clause, husband's parents, wife clause.
std::vector<std::vector<PlannedWord>> plan_record(
    Rng& rng, const Pools& names, const Pools& surnames,
    const Pools& occupations, const Pools& locations,
    const std::vector<std::string>& states, bool test_split,
    double oov_rate) {
  using Cat = SemanticCategory;
  using Per = PersonRole;
  auto content = [&](const Pools& p) {
    return pick(p, rng, test_split, oov_rate);
  };

  std::vector<std::vector<PlannedWord>> lines(3);

  static const char* intros[] = {"esposat", "rebere", "matrimoni"};
  add(lines[0], intros[rng.below(3)], Cat::other, Per::none);
  add(lines[0], content(names), Cat::name, Per::husband);
  add(lines[0], content(surnames), Cat::surname, Per::husband);
  if (rng.uniform() < 0.8)
    add(lines[0], content(occupations), Cat::occupation, Per::husband);
  add(lines[0], "de", Cat::other, Per::none);
  add(lines[0], content(locations), Cat::location, Per::husband);

  add(lines[1], "fill", Cat::other, Per::none);
  add(lines[1], "de", Cat::other, Per::none);
  add(lines[1], content(names), Cat::name, Per::husbands_father);
  if (rng.uniform() < 0.5)
    add(lines[1], content(occupations), Cat::occupation,
        Per::husbands_father);
  add(lines[1], "y", Cat::other, Per::none);
  add(lines[1], content(names), Cat::name, Per::husbands_mother);

  add(lines[2], "ab", Cat::other, Per::none);
  add(lines[2], content(names), Cat::name, Per::wife);
  if (rng.uniform() < 0.85)
    add(lines[2], states[rng.below(states.size())], Cat::civil_state,
        Per::wife);
  add(lines[2], "filla", Cat::other, Per::none);
  add(lines[2], "de", Cat::other, Per::none);
  add(lines[2], content(names), Cat::name, Per::wifes_father);
  add(lines[2], "y", Cat::other, Per::none);
  add(lines[2], content(names), Cat::name, Per::wifes_mother);
  if (rng.uniform() < 0.4) {
    add(lines[2], "de", Cat::other, Per::none);
    add(lines[2], content(locations), Cat::location, Per::wife);
  }
  return lines;
}

void validate_synth(const SynthConfig& config) {
  if (config.n_records < 1) throw ConfigError("synth: n_records < 1");
  if (config.line_height < 24)
    throw ConfigError("synth: line_height must be at least 24");
  if (config.train_fraction <= 0 || config.valid_fraction < 0 ||
      config.train_fraction + config.valid_fraction >= 1.0)
    throw ConfigError("synth: split fractions must leave room for a test set");
  if (config.oov_rate < 0 || config.oov_rate > 1)
    throw ConfigError("synth: oov_rate outside [0, 1]");
  if (config.noise < 0 || config.jitter < 0 || config.slant < 0 ||
      config.thickness <= 0)
    throw ConfigError("synth: style parameters must be non-negative");
}

std::string page_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "page_%05d", index);
  return buf;
}

std::string record_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "r%05d", index);
  return buf;
}

}  // namespace

std::vector<SynthPage> synth_generate(std::uint64_t seed,
                                      const SynthConfig& raw_config) {
  validate_synth(raw_config);
  const SynthConfig config = with_default_vocab(raw_config);
  const Pools names = split_pool(config.names);
  const Pools surnames = split_pool(config.surnames);
  const Pools occupations = split_pool(config.occupations);
  const Pools locations = split_pool(config.locations);

  const int n = config.n_records;
  const int train_end = static_cast<int>(n * config.train_fraction);
  const int valid_end = static_cast<int>(
      n * (config.train_fraction + config.valid_fraction));

  const int margin = 14;
  const int line_gap = 12;
  const int cell_h = config.line_height;

  std::vector<SynthPage> pages(static_cast<std::size_t>(n));
  for (int page_index = 0; page_index < n; ++page_index) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(page_index));
    const SplitTag split = page_index < train_end  ? SplitTag::train
                           : page_index < valid_end ? SplitTag::valid
                                                    : SplitTag::test;
    const std::vector<std::vector<PlannedWord>> lines =
        plan_record(rng, names, surnames, occupations, locations,
                    config.states, split == SplitTag::test, config.oov_rate);

    // Render words first; page width depends on the longest line.
    struct Placed {
      PlannedWord word;
      RenderedWord rendered;
      int x = 0, y = 0;  // canvas origin on the page
    };
    std::vector<std::vector<Placed>> placed(lines.size());
    int page_width = 0;
    for (std::size_t li = 0; li < lines.size(); ++li) {
      const int line_top = margin + static_cast<int>(li) * (cell_h + line_gap);
      int x = margin + static_cast<int>(rng.below(6));
      for (const PlannedWord& word : lines[li]) {
        Placed p;
        p.word = word;
        p.rendered = render_word(word.transcript, config, rng);
        const int dy =
            std::clamp(static_cast<int>(std::lround(rng.gauss() * 2.0)), -4, 4);
        p.x = x;
        p.y = line_top + dy;
        x += p.rendered.ink_right - p.rendered.ink_left + 1 +
             static_cast<int>(cell_h * 0.28 + rng.uniform() * 4.0);
        placed[li].push_back(std::move(p));
      }
      page_width = std::max(page_width, x + margin);
    }
    const int page_height =
        2 * margin + static_cast<int>(lines.size()) * cell_h +
        (static_cast<int>(lines.size()) - 1) * line_gap;

    SynthPage& page = pages[static_cast<std::size_t>(page_index)];
    page.image = GrayImage(page_height, page_width);
    page.manifest.split = split;
    page.manifest.image = "pages/" + page_name(page_index) + ".png";

    const std::string rid = record_name(page_index);
    for (std::size_t li = 0; li < placed.size(); ++li) {
      for (const Placed& p : placed[li]) {
        const GrayImage& canvas = p.rendered.canvas;
        // Blit only the ink window so the box equals the visible extent.
        WordBox box;
        box.x = p.x;
        box.y = p.y + p.rendered.ink_top;
        box.w = p.rendered.ink_right - p.rendered.ink_left + 1;
        box.h = p.rendered.ink_bottom - p.rendered.ink_top + 1;
        for (int r = p.rendered.ink_top; r <= p.rendered.ink_bottom; ++r) {
          const int pr = p.y + r;
          if (pr < 0 || pr >= page_height) continue;
          for (int c = p.rendered.ink_left; c <= p.rendered.ink_right; ++c) {
            const int pc = p.x + (c - p.rendered.ink_left);
            if (pc < 0 || pc >= page_width) continue;
            if (canvas.at(r, c) > page.image.at(pr, pc))
              page.image.at(pr, pc) = canvas.at(r, c);
          }
        }
        box.y = std::clamp(box.y, 0, page_height - 1);
        box.h = std::min(box.h, page_height - box.y);
        box.transcript = p.word.transcript;
        box.category = p.word.category;
        box.person = p.word.person;
        box.line_id = rid + "_l" + std::to_string(li);
        box.record_id = rid;
        page.manifest.words.push_back(std::move(box));
      }
    }

    if (config.noise > 0) {
      for (int r = 0; r < page_height; ++r)
        for (int c = 0; c < page_width; ++c)
          page.image.at(r, c) = std::clamp(
              page.image.at(r, c) + rng.gauss() * config.noise, 0.0, 1.0);
    }
  }
  return pages;
}

void write_synth_dataset(const std::vector<SynthPage>& pages,
                         const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "pages");
  std::vector<PageManifest> manifests;
  for (const SynthPage& page : pages) {
    write_png((fs::path(out_dir) / page.manifest.image).string(), page.image);
    manifests.push_back(page.manifest);
  }
  save_manifest((fs::path(out_dir) / "manifest.json").string(), manifests);
}

double oov_fraction(const std::vector<SynthPage>& pages) {
  std::set<std::string> seen;
  for (const SynthPage& page : pages)
    if (page.manifest.split != SplitTag::test)
      for (const WordBox& w : page.manifest.words) seen.insert(w.transcript);
  long total = 0, oov = 0;
  for (const SynthPage& page : pages)
    if (page.manifest.split == SplitTag::test)
      for (const WordBox& w : page.manifest.words) {
        ++total;
        if (!seen.count(w.transcript)) ++oov;
      }
  if (total == 0) throw DataError("oov_fraction: no test words");
  return static_cast<double>(oov) / static_cast<double>(total);
}

}  // namespace htrner
