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

#include <cstddef>
#include <vector>

namespace htrner {

// Row-major grayscale image. Intensities live in [0, 1] with 0 = background
// and 1 = ink.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int height, int width, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return height_ == 0 || width_ == 0; }

  double& at(int row, int col) { return data_[idx(row, col)]; }
  double at(int row, int col) const { return data_[idx(row, col)]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t idx(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Scales to the target height with bilinear interpolation, preserving aspect
// ratio (width is rounded to the nearest integer, at least 1). Returns the
// input untouched when the height already matches.
GrayImage normalize_height(const GrayImage& image, int target_height);

// Horizontal concatenation with `separator_px` background columns between
// consecutive images. All images must share the same height.
GrayImage concat_images(const std::vector<GrayImage>& images,
                        int separator_px);

// Copies the [top, top+height) x [left, left+width) window. Bounds must lie
// inside the image.
GrayImage crop(const GrayImage& image, int top, int left, int height,
               int width);

}  // namespace htrner
