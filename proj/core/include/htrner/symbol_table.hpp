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

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "htrner/types.hpp"

namespace htrner {

// What a tag symbol means when decoding.
struct TagInfo {
  enum class Kind {
    category_open,
    category_close,
    category_single,
    person_open,
    person_close,
    person_single,
    combined,
  };
  Kind kind;
  SemanticCategory category = SemanticCategory::other;
  PersonRole person = PersonRole::none;
};

// Ordered alphabet of the recognizer: the CTC blank at index 0, then the
// character symbols sorted by code point, the word space, and the
// scheme-specific tag symbols sorted lexicographically. Indices are dense
// and 0-based; tag surface forms are fixed strings like "<location>",
// "<location/>" or "<location_husband/>".
class SymbolTable {
 public:
  static const std::string kBlankSurface;   // "<blank>"
  static const std::string kSpaceSurface;   // "<space>"

  // Builds a table from an explicit symbol list (e.g. a symbols.txt file).
  // Tag surface forms are parsed according to `scheme`.
  static SymbolTable from_symbols(std::vector<std::string> symbols,
                                  TagScheme scheme);

  int size() const { return static_cast<int>(symbols_.size()); }
  int blank_index() const { return 0; }
  int space_index() const { return space_index_; }
  TagScheme scheme() const { return scheme_; }

  const std::string& surface(int index) const { return symbols_.at(index); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  bool is_tag(int index) const { return tags_.count(index) > 0; }
  bool is_char(int index) const { return chars_by_index_.count(index) > 0; }

  // nullptr when `index` is not a tag symbol.
  const TagInfo* tag_info(int index) const {
    auto it = tags_.find(index);
    return it == tags_.end() ? nullptr : &it->second;
  }

  std::optional<int> find(const std::string& surface) const {
    auto it = index_of_.find(surface);
    if (it == index_of_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<int> char_index(char32_t cp) const {
    auto it = char_index_.find(cp);
    if (it == char_index_.end()) return std::nullopt;
    return it->second;
  }

  char32_t char_at(int index) const { return chars_by_index_.at(index); }

  std::vector<int> tag_indices() const;

  // Fixed tag surface forms.
  static std::string open_tag(SemanticCategory c);
  static std::string open_tag(PersonRole p);
  static std::string close_tag(SemanticCategory c);
  static std::string close_tag(PersonRole p);
  static std::string single_tag(SemanticCategory c);
  static std::string single_tag(PersonRole p);
  static std::string combined_tag(SemanticCategory c, PersonRole p);

  // One symbol per line, UTF-8; the index is the line number.
  void save(const std::filesystem::path& path) const;
  static SymbolTable load(const std::filesystem::path& path, TagScheme scheme);

  bool operator==(const SymbolTable& o) const {
    return symbols_ == o.symbols_ && scheme_ == o.scheme_;
  }

  // An empty table; usable only as a target for assignment.
  SymbolTable() = default;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> index_of_;
  std::map<int, TagInfo> tags_;
  std::map<char32_t, int> char_index_;
  std::map<int, char32_t> chars_by_index_;
  int space_index_ = -1;
  TagScheme scheme_ = TagScheme::combined;
};

}  // namespace htrner
