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

#include "htrner/image.hpp"

namespace htrner {

// 8-bit grayscale PNG. On disk 255 = background (white) and 0 = ink, so a
// pixel is stored as round(255 * (1 - intensity)).
void write_png(const std::string& path, const GrayImage& image);

// Reads an 8-bit grayscale PNG back into [0, 1] ink intensities. Color and
// 16-bit inputs are converted by libpng. Throws DataError on failure.
GrayImage read_png(const std::string& path);

}  // namespace htrner
