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

#include <array>
#include <string>
#include <vector>

namespace htrner {

// Semantic category of a word. `other` means "no entity".
enum class SemanticCategory {
  name,
  surname,
  occupation,
  location,
  civil_state,
  other,
};

// Person a word refers to. `none` means "no person".
enum class PersonRole {
  wife,
  husband,
  wifes_father,
  wifes_mother,
  husbands_father,
  husbands_mother,
  other_person,
  none,
};

// How transcript and semantic labels are interleaved into one symbol
// sequence.
enum class TagScheme {
  open_close,      // <location> <husband> B a r a </husband> </location>
  single_separate, // <location/> <husband/> B a r a
  change_of_person,// person tag only emitted when the person changes
  combined,        // <location_husband/> B a r a
};

inline constexpr std::array<SemanticCategory, 6> kAllCategories = {
    SemanticCategory::name,        SemanticCategory::surname,
    SemanticCategory::occupation,  SemanticCategory::location,
    SemanticCategory::civil_state, SemanticCategory::other,
};

inline constexpr std::array<PersonRole, 8> kAllPersons = {
    PersonRole::wife,           PersonRole::husband,
    PersonRole::wifes_father,   PersonRole::wifes_mother,
    PersonRole::husbands_father, PersonRole::husbands_mother,
    PersonRole::other_person,   PersonRole::none,
};

inline constexpr std::array<TagScheme, 4> kAllSchemes = {
    TagScheme::open_close,
    TagScheme::single_separate,
    TagScheme::change_of_person,
    TagScheme::combined,
};

const std::string& to_string(SemanticCategory c);
const std::string& to_string(PersonRole p);
const std::string& to_string(TagScheme s);

SemanticCategory category_from_string(const std::string& name);
PersonRole person_from_string(const std::string& name);
TagScheme scheme_from_string(const std::string& name);

// A transcribed word with its semantic annotation. The transcript is a
// non-empty UTF-8 string without whitespace.
struct AnnotatedWord {
  std::string transcript;
  SemanticCategory category = SemanticCategory::other;
  PersonRole person = PersonRole::none;

  bool operator==(const AnnotatedWord&) const = default;
};

// An ordered, non-empty list of annotated words; the ground-truth unit of
// both evaluation tracks.
struct AnnotatedRecord {
  std::vector<AnnotatedWord> words;
  std::string record_id;

  bool operator==(const AnnotatedRecord& o) const { return words == o.words; }
};

}  // namespace htrner
