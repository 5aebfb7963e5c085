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

#include <string>
#include <vector>

#include "htrner/image.hpp"
#include "htrner/symbol_table.hpp"
#include "htrner/tag_codec.hpp"
#include "htrner/types.hpp"

namespace htrner {

enum class SplitTag { train, valid, test };
enum class ExtractionMethod { bbox_union, weighted_average };
enum class SampleLevel { line, record };

const std::string& to_string(SplitTag s);
SplitTag split_from_string(const std::string& name);
const std::string& to_string(ExtractionMethod m);
ExtractionMethod extraction_from_string(const std::string& name);
const std::string& to_string(SampleLevel l);
SampleLevel level_from_string(const std::string& name);

// One segmented word on a page. Boxes are pixel rectangles [x, x+w) x
// [y, y+h). Words are listed in reading order; line_ids group into
// record_ids.
struct WordBox {
  int x = 0, y = 0, w = 0, h = 0;
  std::string transcript;
  SemanticCategory category = SemanticCategory::other;
  PersonRole person = PersonRole::none;
  std::string line_id;
  std::string record_id;
};

struct PageManifest {
  std::string image;  // path relative to the manifest file
  SplitTag split = SplitTag::train;
  std::vector<WordBox> words;
};

// JSON schema: {"pages": [{"image", "split", "words": [{x,y,w,h,transcript,
// category,person,line_id,record_id}]}]}.
std::vector<PageManifest> load_manifest(const std::string& path);
void save_manifest(const std::string& path,
                   const std::vector<PageManifest>& pages);

// Crops one text line. The x-range is the union of the word x-ranges. The
// y-range is either the union of tops/bottoms or the width-weighted average
// of them (floor the top, ceil the bottom, clamp to the page).
GrayImage extract_line(const GrayImage& page, const std::vector<WordBox>& words,
                       ExtractionMethod method);

struct LineGroup {
  std::string line_id;
  std::string record_id;
  std::vector<WordBox> words;  // reading order
};

// Consecutive words sharing a line_id, in listed order.
std::vector<LineGroup> group_lines(const PageManifest& page);

struct PrepareOptions {
  TagScheme scheme = TagScheme::combined;
  SampleLevel level = SampleLevel::line;
  ExtractionMethod extraction = ExtractionMethod::weighted_average;
  int input_height = 64;
  int separator_px = 16;  // background columns between record lines
  bool closed_world = false;
};

// Reads a manifest plus its page images and writes a training-ready dataset:
// meta.json (options + per-split sample index), symbols.txt, one PNG + JSON
// word annotation per sample under train/, valid/, test/, and per split a
// targets.txt of readable encodings (id, tab, space-separated surfaces).
void prepare_dataset(const std::string& manifest_path,
                     const std::string& out_dir, const PrepareOptions& options);

struct LoadedSample {
  std::string id;         // line_id at line level, record_id at record level
  std::string record_id;
  GrayImage image;
  AnnotatedRecord words;
  std::vector<int> target;  // encode() output under the dataset scheme
};

struct LoadedDataset {
  PrepareOptions options;
  SymbolTable symbols;
  std::vector<LoadedSample> train;
  std::vector<LoadedSample> valid;
  std::vector<LoadedSample> test;
};

LoadedDataset load_dataset(const std::string& dir);

// Loads one split only (index order preserved).
std::vector<LoadedSample> load_split(const std::string& dir, SplitTag split);

}  // namespace htrner
