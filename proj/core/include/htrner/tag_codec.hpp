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

#include <vector>

#include "htrner/symbol_table.hpp"
#include "htrner/types.hpp"

namespace htrner {

// Conversion between annotated records and flat symbol sequences. Tag
// symbols are single alphabet entries (one softmax class each), never
// spelled out character by character.

struct CodecOptions {
  // Pre-enumerate every (category, person) pair for the combined scheme
  // instead of only the pairs observed in the corpus.
  bool closed_world = false;
};

// Builds the alphabet for a corpus under a scheme: blank, characters sorted
// by code point, the word space, then tag symbols sorted lexicographically.
// Deterministic and independent of corpus order.
SymbolTable build_symbol_table(const std::vector<AnnotatedRecord>& records,
                               TagScheme scheme, CodecOptions options = {});

// Flattens a record into symbol indices under the scheme's grammar. Words
// are separated by exactly one space symbol; the blank is never emitted.
std::vector<int> encode(const AnnotatedRecord& record, TagScheme scheme,
                        const SymbolTable& table);

enum class DecodeMode {
  // Total function: malformed input is repaired (unmatched closes ignored,
  // unclosed opens close at the next space, conflicting tags last-wins,
  // empty words dropped).
  repair,
  // Throws CodecError with the position of the first violation.
  strict,
};

// Inverse of encode. Untagged words decode to (other, none); under the
// change-of-person scheme the person state persists across words until the
// next person tag.
AnnotatedRecord decode(const std::vector<int>& symbols, TagScheme scheme,
                       const SymbolTable& table,
                       DecodeMode mode = DecodeMode::repair);

// Canonical form of a record under a scheme: annotations the scheme cannot
// express are erased (combined drops the person of untagged words;
// change-of-person applies person persistence). decode(encode(r)) equals
// normalize_record(r) for every well-formed record.
AnnotatedRecord normalize_record(const AnnotatedRecord& record,
                                 TagScheme scheme);

}  // namespace htrner
