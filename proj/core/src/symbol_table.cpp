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

#include "htrner/symbol_table.hpp"

#include <fstream>

#include "htrner/error.hpp"
#include "htrner/utf8.hpp"

namespace htrner {

const std::string SymbolTable::kBlankSurface = "<blank>";
const std::string SymbolTable::kSpaceSurface = "<space>";

std::string SymbolTable::open_tag(SemanticCategory c) {
  return "<" + to_string(c) + ">";
}
std::string SymbolTable::open_tag(PersonRole p) {
  return "<" + to_string(p) + ">";
}
std::string SymbolTable::close_tag(SemanticCategory c) {
  return "</" + to_string(c) + ">";
}
std::string SymbolTable::close_tag(PersonRole p) {
  return "</" + to_string(p) + ">";
}
std::string SymbolTable::single_tag(SemanticCategory c) {
  return "<" + to_string(c) + "/>";
}
std::string SymbolTable::single_tag(PersonRole p) {
  return "<" + to_string(p) + "/>";
}
std::string SymbolTable::combined_tag(SemanticCategory c, PersonRole p) {
  return "<" + to_string(c) + "_" + to_string(p) + "/>";
}

namespace {

// Parses a tag surface form under the given scheme. Returns false when the
// string is not a recognizable tag.
bool parse_tag(const std::string& s, TagScheme scheme, TagInfo* out) {
  if (s.size() < 3 || s.front() != '<' || s.back() != '>') return false;
  bool closing = s.size() > 3 && s[1] == '/';
  bool single = s.size() > 3 && s[s.size() - 2] == '/';
  if (closing && single) return false;
  std::string body = closing ? s.substr(2, s.size() - 3)
                             : (single ? s.substr(1, s.size() - 3)
                                       : s.substr(1, s.size() - 2));
  if (body.empty()) return false;

  auto as_category = [&](const std::string& name) -> std::optional<SemanticCategory> {
    for (auto c : kAllCategories)
      if (to_string(c) == name && c != SemanticCategory::other) return c;
    return std::nullopt;
  };
  auto as_person = [&](const std::string& name) -> std::optional<PersonRole> {
    for (auto p : kAllPersons)
      if (to_string(p) == name && p != PersonRole::none) return p;
    return std::nullopt;
  };

  switch (scheme) {
    case TagScheme::open_close: {
      if (single) return false;
      if (auto c = as_category(body)) {
        *out = {closing ? TagInfo::Kind::category_close
                        : TagInfo::Kind::category_open,
                *c, PersonRole::none};
        return true;
      }
      if (auto p = as_person(body)) {
        *out = {closing ? TagInfo::Kind::person_close
                        : TagInfo::Kind::person_open,
                SemanticCategory::other, *p};
        return true;
      }
      return false;
    }
    case TagScheme::single_separate:
    case TagScheme::change_of_person: {
      if (!single) return false;
      if (auto c = as_category(body)) {
        *out = {TagInfo::Kind::category_single, *c, PersonRole::none};
        return true;
      }
      if (auto p = as_person(body)) {
        *out = {TagInfo::Kind::person_single, SemanticCategory::other, *p};
        return true;
      }
      return false;
    }
    case TagScheme::combined: {
      if (!single) return false;
      // body = "<category>_<person>"; category names are not prefixes of one
      // another so the split is unambiguous.
      for (auto c : kAllCategories) {
        if (c == SemanticCategory::other) continue;
        const std::string& cname = to_string(c);
        if (body.size() > cname.size() + 1 &&
            body.compare(0, cname.size(), cname) == 0 &&
            body[cname.size()] == '_') {
          std::string pname = body.substr(cname.size() + 1);
          for (auto p : kAllPersons) {
            if (to_string(p) == pname) {
              *out = {TagInfo::Kind::combined, c, p};
              return true;
            }
          }
        }
      }
      return false;
    }
  }
  return false;
}

}  // namespace

SymbolTable SymbolTable::from_symbols(std::vector<std::string> symbols,
                                      TagScheme scheme) {
  if (symbols.empty() || symbols[0] != kBlankSurface)
    throw DataError("symbol table must start with the blank symbol");
  SymbolTable t;
  t.scheme_ = scheme;
  t.symbols_ = std::move(symbols);
  for (int i = 0; i < static_cast<int>(t.symbols_.size()); ++i) {
    const std::string& s = t.symbols_[i];
    if (t.index_of_.count(s))
      throw DataError("duplicate symbol in table: '" + s + "'");
    t.index_of_[s] = i;
    if (i == 0) continue;
    if (s == kSpaceSurface) {
      t.space_index_ = i;
      continue;
    }
    TagInfo info;
    if (parse_tag(s, scheme, &info)) {
      t.tags_[i] = info;
      continue;
    }
    auto cps = utf8::decode(s);
    if (cps.size() != 1)
      throw DataError("symbol '" + s +
                      "' is neither a single character nor a valid tag");
    if (t.char_index_.count(cps[0]))
      throw DataError("duplicate character symbol: '" + s + "'");
    t.char_index_[cps[0]] = i;
    t.chars_by_index_[i] = cps[0];
  }
  if (t.space_index_ < 0) throw DataError("symbol table lacks a space symbol");
  return t;
}

std::vector<int> SymbolTable::tag_indices() const {
  std::vector<int> out;
  out.reserve(tags_.size());
  for (const auto& [idx, info] : tags_) out.push_back(idx);
  return out;
}

void SymbolTable::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write symbol table: " + path.string());
  for (const auto& s : symbols_) os << s << '\n';
}

SymbolTable SymbolTable::load(const std::filesystem::path& path,
                              TagScheme scheme) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read symbol table: " + path.string());
  std::vector<std::string> symbols;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    symbols.push_back(line);
  }
  return from_symbols(std::move(symbols), scheme);
}

}  // namespace htrner
