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

#include "htrner/tag_codec.hpp"

#include <algorithm>
#include <set>

#include "htrner/error.hpp"
#include "htrner/utf8.hpp"

namespace htrner {

namespace {

bool is_whitespace(char32_t cp) {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r';
}

void check_word(const AnnotatedWord& w) {
  if (w.transcript.empty()) throw DataError("empty word transcript");
  for (char32_t cp : utf8::decode(w.transcript))
    if (is_whitespace(cp))
      throw DataError("transcript contains whitespace: '" + w.transcript +
                      "'");
}

int require_tag(const SymbolTable& table, const std::string& surface) {
  auto idx = table.find(surface);
  if (!idx)
    throw DataError("tag symbol missing from table: '" + surface + "'");
  return *idx;
}

}  // namespace

SymbolTable build_symbol_table(const std::vector<AnnotatedRecord>& records,
                               TagScheme scheme, CodecOptions options) {
  if (records.empty())
    throw DataError("cannot build a symbol table from an empty record list");

  std::set<char32_t> chars;
  std::set<std::pair<SemanticCategory, PersonRole>> observed_pairs;
  for (const auto& rec : records) {
    if (rec.words.empty()) throw DataError("empty record: " + rec.record_id);
    for (const auto& w : rec.words) {
      check_word(w);
      for (char32_t cp : utf8::decode(w.transcript)) chars.insert(cp);
      if (w.category != SemanticCategory::other)
        observed_pairs.insert({w.category, w.person});
    }
  }

  std::set<std::string> tags;
  switch (scheme) {
    case TagScheme::open_close:
      for (auto c : kAllCategories) {
        if (c == SemanticCategory::other) continue;
        tags.insert(SymbolTable::open_tag(c));
        tags.insert(SymbolTable::close_tag(c));
      }
      for (auto p : kAllPersons) {
        if (p == PersonRole::none) continue;
        tags.insert(SymbolTable::open_tag(p));
        tags.insert(SymbolTable::close_tag(p));
      }
      break;
    case TagScheme::single_separate:
    case TagScheme::change_of_person:
      for (auto c : kAllCategories)
        if (c != SemanticCategory::other)
          tags.insert(SymbolTable::single_tag(c));
      for (auto p : kAllPersons)
        if (p != PersonRole::none) tags.insert(SymbolTable::single_tag(p));
      break;
    case TagScheme::combined:
      if (options.closed_world) {
        for (auto c : kAllCategories) {
          if (c == SemanticCategory::other) continue;
          for (auto p : kAllPersons)
            tags.insert(SymbolTable::combined_tag(c, p));
        }
      } else {
        for (const auto& [c, p] : observed_pairs)
          tags.insert(SymbolTable::combined_tag(c, p));
      }
      break;
  }

  std::vector<std::string> symbols;
  symbols.reserve(2 + chars.size() + tags.size());
  symbols.push_back(SymbolTable::kBlankSurface);
  for (char32_t cp : chars) symbols.push_back(utf8::encode(cp));
  symbols.push_back(SymbolTable::kSpaceSurface);
  for (const auto& t : tags) symbols.push_back(t);
  return SymbolTable::from_symbols(std::move(symbols), scheme);
}

AnnotatedRecord normalize_record(const AnnotatedRecord& record,
                                 TagScheme scheme) {
  AnnotatedRecord out = record;
  switch (scheme) {
    case TagScheme::open_close:
    case TagScheme::single_separate:
      break;
    case TagScheme::combined:
      // Untagged words cannot carry a person.
      for (auto& w : out.words)
        if (w.category == SemanticCategory::other) w.person = PersonRole::none;
      break;
    case TagScheme::change_of_person: {
      // A word without an explicit person inherits the previous one; a
      // return to `none` after a tagged person is not representable.
      PersonRole current = PersonRole::none;
      for (auto& w : out.words) {
        if (w.person != PersonRole::none) current = w.person;
        w.person = current;
      }
      break;
    }
  }
  return out;
}

std::vector<int> encode(const AnnotatedRecord& record, TagScheme scheme,
                        const SymbolTable& table) {
  if (record.words.empty()) throw DataError("cannot encode an empty record");
  const AnnotatedRecord rec = normalize_record(record, scheme);

  std::vector<int> out;
  auto push_chars = [&](const std::string& transcript) {
    for (char32_t cp : utf8::decode(transcript)) {
      auto idx = table.char_index(cp);
      if (!idx)
        throw DataError("character not in symbol table: '" +
                        utf8::encode(cp) + "' in word '" + transcript + "'");
      out.push_back(*idx);
    }
  };

  PersonRole previous_person = PersonRole::none;
  for (std::size_t i = 0; i < rec.words.size(); ++i) {
    const AnnotatedWord& w = rec.words[i];
    check_word(w);
    if (i > 0) out.push_back(table.space_index());

    switch (scheme) {
      case TagScheme::open_close: {
        bool has_cat = w.category != SemanticCategory::other;
        bool has_per = w.person != PersonRole::none;
        if (has_cat)
          out.push_back(require_tag(table, SymbolTable::open_tag(w.category)));
        if (has_per)
          out.push_back(require_tag(table, SymbolTable::open_tag(w.person)));
        push_chars(w.transcript);
        if (has_per)
          out.push_back(require_tag(table, SymbolTable::close_tag(w.person)));
        if (has_cat)
          out.push_back(
              require_tag(table, SymbolTable::close_tag(w.category)));
        break;
      }
      case TagScheme::single_separate: {
        if (w.category != SemanticCategory::other)
          out.push_back(
              require_tag(table, SymbolTable::single_tag(w.category)));
        if (w.person != PersonRole::none)
          out.push_back(require_tag(table, SymbolTable::single_tag(w.person)));
        push_chars(w.transcript);
        break;
      }
      case TagScheme::change_of_person: {
        if (w.person != previous_person && w.person != PersonRole::none)
          out.push_back(require_tag(table, SymbolTable::single_tag(w.person)));
        previous_person = w.person;
        if (w.category != SemanticCategory::other)
          out.push_back(
              require_tag(table, SymbolTable::single_tag(w.category)));
        push_chars(w.transcript);
        break;
      }
      case TagScheme::combined: {
        if (w.category != SemanticCategory::other)
          out.push_back(require_tag(
              table, SymbolTable::combined_tag(w.category, w.person)));
        push_chars(w.transcript);
        break;
      }
    }
  }
  return out;
}

namespace {

// Shared decoder state machine. Repair mode is total; strict mode throws
// CodecError at the first non-canonical token.
class Decoder {
 public:
  Decoder(TagScheme scheme, const SymbolTable& table, DecodeMode mode)
      : scheme_(scheme), table_(table), mode_(mode) {}

  AnnotatedRecord run(const std::vector<int>& symbols) {
    for (std::size_t i = 0; i < symbols.size(); ++i) {
      pos_ = i;
      step(symbols[i]);
    }
    pos_ = symbols.size();
    finish();
    return std::move(record_);
  }

 private:
  void violation(const std::string& msg) {
    if (mode_ == DecodeMode::strict) throw CodecError(msg, pos_);
  }

  void step(int sym) {
    if (sym < 0 || sym >= table_.size()) {
      violation("symbol index out of range");
      return;
    }
    if (sym == table_.blank_index()) {
      violation("blank symbol in decoder input");
      return;
    }
    last_was_space_ = false;
    if (sym == table_.space_index()) {
      last_was_space_ = true;
      on_space();
      return;
    }
    const TagInfo* info = table_.tag_info(sym);
    bool is_close = info != nullptr &&
                    (info->kind == TagInfo::Kind::category_close ||
                     info->kind == TagInfo::Kind::person_close);
    if (word_done_ && !is_close) {
      violation("missing space between words");
      word_done_ = false;
    }
    if (info != nullptr)
      on_tag(*info);
    else
      chars_.push_back(table_.char_at(sym));
  }

  void on_space() {
    if (chars_.empty() && !word_done_) {
      violation("space without a preceding word");
      return;  // inter-tag or duplicate space: tolerated, tags kept pending
    }
    if (!chars_.empty()) finalize_word();
    word_done_ = false;
    if (scheme_ == TagScheme::open_close &&
        (active_cat_ != SemanticCategory::other ||
         active_person_ != PersonRole::none)) {
      violation("tag still open at word boundary");
      active_cat_ = SemanticCategory::other;   // unclosed opens close here
      active_person_ = PersonRole::none;
    }
  }

  void on_tag(const TagInfo& info) {
    if (!chars_.empty() && info.kind != TagInfo::Kind::category_close &&
        info.kind != TagInfo::Kind::person_close)
      violation("tag inside a word");
    switch (info.kind) {
      case TagInfo::Kind::category_open:
        if (active_cat_ != SemanticCategory::other)
          violation("conflicting category tags");
        active_cat_ = info.category;
        break;
      case TagInfo::Kind::person_open:
        if (active_person_ != PersonRole::none)
          violation("conflicting person tags");
        active_person_ = info.person;
        break;
      case TagInfo::Kind::category_close:
        if (!chars_.empty()) finalize_word();
        if (active_cat_ == info.category) {
          if (active_person_ != PersonRole::none)
            violation("category closed before person");
          active_cat_ = SemanticCategory::other;
        } else {
          violation("unmatched closing tag");
        }
        break;
      case TagInfo::Kind::person_close:
        if (!chars_.empty()) finalize_word();
        if (active_person_ == info.person)
          active_person_ = PersonRole::none;
        else
          violation("unmatched closing tag");
        break;
      case TagInfo::Kind::category_single:
        if (pending_cat_ != SemanticCategory::other)
          violation("conflicting category tags");
        pending_cat_ = info.category;
        break;
      case TagInfo::Kind::person_single:
        if (scheme_ == TagScheme::change_of_person) {
          if (pending_cat_ != SemanticCategory::other)
            violation("person tag after category tag");
          if (persistent_person_ == info.person)
            violation("redundant person tag");
          persistent_person_ = info.person;
        } else {
          if (pending_person_ != PersonRole::none)
            violation("conflicting person tags");
          pending_person_ = info.person;
        }
        break;
      case TagInfo::Kind::combined:
        if (pending_cat_ != SemanticCategory::other)
          violation("conflicting combined tags");
        pending_cat_ = info.category;
        pending_person_ = info.person;
        break;
    }
  }

  void finalize_word() {
    AnnotatedWord w;
    w.transcript = utf8::encode(chars_);
    chars_.clear();
    switch (scheme_) {
      case TagScheme::open_close:
        w.category = active_cat_;
        w.person = active_person_;
        break;
      case TagScheme::single_separate:
      case TagScheme::combined:
        w.category = pending_cat_;
        w.person = pending_person_;
        break;
      case TagScheme::change_of_person:
        w.category = pending_cat_;
        w.person = persistent_person_;
        break;
    }
    pending_cat_ = SemanticCategory::other;
    pending_person_ = PersonRole::none;
    word_done_ = true;
    record_.words.push_back(std::move(w));
  }

  void finish() {
    if (last_was_space_) violation("trailing space");
    if (!chars_.empty()) {
      finalize_word();
    } else if (pending_cat_ != SemanticCategory::other ||
               pending_person_ != PersonRole::none) {
      violation("dangling tag at end of sequence");
    }
    if (scheme_ == TagScheme::open_close &&
        (active_cat_ != SemanticCategory::other ||
         active_person_ != PersonRole::none))
      violation("unclosed tag at end of sequence");
  }

  TagScheme scheme_;
  const SymbolTable& table_;
  DecodeMode mode_;
  std::size_t pos_ = 0;

  std::vector<char32_t> chars_;
  SemanticCategory pending_cat_ = SemanticCategory::other;
  PersonRole pending_person_ = PersonRole::none;
  SemanticCategory active_cat_ = SemanticCategory::other;
  PersonRole active_person_ = PersonRole::none;
  PersonRole persistent_person_ = PersonRole::none;
  bool last_was_space_ = false;
  bool word_done_ = false;
  AnnotatedRecord record_;
};

}  // namespace

AnnotatedRecord decode(const std::vector<int>& symbols, TagScheme scheme,
                       const SymbolTable& table, DecodeMode mode) {
  return Decoder(scheme, table, mode).run(symbols);
}

}  // namespace htrner
