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

#include "htrner/types.hpp"

#include "htrner/error.hpp"

namespace htrner {

namespace {
const std::array<std::string, 6> kCategoryNames = {
    "name", "surname", "occupation", "location", "civil_state", "other"};
const std::array<std::string, 8> kPersonNames = {
    "wife",           "husband",         "wifes_father", "wifes_mother",
    "husbands_father", "husbands_mother", "other_person", "none"};
const std::array<std::string, 4> kSchemeNames = {
    "open_close", "single_separate", "change_of_person", "combined"};
}  // namespace

const std::string& to_string(SemanticCategory c) {
  return kCategoryNames[static_cast<std::size_t>(c)];
}

const std::string& to_string(PersonRole p) {
  return kPersonNames[static_cast<std::size_t>(p)];
}

const std::string& to_string(TagScheme s) {
  return kSchemeNames[static_cast<std::size_t>(s)];
}

SemanticCategory category_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i)
    if (kCategoryNames[i] == name) return static_cast<SemanticCategory>(i);
  throw DataError("unknown semantic category: '" + name + "'");
}

PersonRole person_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kPersonNames.size(); ++i)
    if (kPersonNames[i] == name) return static_cast<PersonRole>(i);
  throw DataError("unknown person role: '" + name + "'");
}

TagScheme scheme_from_string(const std::string& name) {
  for (std::size_t i = 0; i < kSchemeNames.size(); ++i)
    if (kSchemeNames[i] == name) return static_cast<TagScheme>(i);
  throw DataError("unknown tag scheme: '" + name + "'");
}

}  // namespace htrner
