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

#include <cstdint>
#include <string>
#include <vector>

namespace htrner::utf8 {

// Decodes a UTF-8 string into code points. Throws DataError on malformed
// input.
std::vector<char32_t> decode(const std::string& s);

// Encodes a single code point as UTF-8.
std::string encode(char32_t cp);

// Encodes a sequence of code points.
std::string encode(const std::vector<char32_t>& cps);

// Number of code points in a UTF-8 string.
std::size_t length(const std::string& s);

}  // namespace htrner::utf8
