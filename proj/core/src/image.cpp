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

#include "htrner/image.hpp"

#include <algorithm>
#include <cmath>

#include "htrner/error.hpp"

namespace htrner {

GrayImage::GrayImage(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 0 || width < 0) throw DataError("GrayImage: negative size");
  data_.assign(static_cast<std::size_t>(height) * width, fill);
}

GrayImage normalize_height(const GrayImage& image, int target_height) {
  if (target_height <= 0) throw DataError("normalize_height: target <= 0");
  if (image.empty()) throw DataError("normalize_height: empty image");
  if (image.height() == target_height) return image;

  const double scale =
      static_cast<double>(target_height) / static_cast<double>(image.height());
  const int target_width = std::max(
      1, static_cast<int>(std::lround(image.width() * scale)));

  GrayImage out(target_height, target_width);
  const double row_ratio =
      static_cast<double>(image.height()) / static_cast<double>(target_height);
  const double col_ratio =
      static_cast<double>(image.width()) / static_cast<double>(target_width);
  for (int r = 0; r < target_height; ++r) {
    // Pixel centers map back to source coordinates; edges clamp.
    const double sy = (r + 0.5) * row_ratio - 0.5;
    const double syc = std::clamp(sy, 0.0, image.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(syc));
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double fy = syc - y0;
    for (int c = 0; c < target_width; ++c) {
      const double sx = (c + 0.5) * col_ratio - 0.5;
      const double sxc = std::clamp(sx, 0.0, image.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(sxc));
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double fx = sxc - x0;
      const double top =
          image.at(y0, x0) * (1.0 - fx) + image.at(y0, x1) * fx;
      const double bottom =
          image.at(y1, x0) * (1.0 - fx) + image.at(y1, x1) * fx;
      out.at(r, c) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

GrayImage concat_images(const std::vector<GrayImage>& images,
                        int separator_px) {
  if (images.empty()) throw DataError("concat_images: no images");
  if (separator_px < 0) throw DataError("concat_images: negative separator");
  const int height = images.front().height();
  long total_width = 0;
  for (const GrayImage& im : images) {
    if (im.height() != height)
      throw DataError("concat_images: height mismatch");
    total_width += im.width();
  }
  total_width += static_cast<long>(separator_px) * (images.size() - 1);

  GrayImage out(height, static_cast<int>(total_width));
  int offset = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (i > 0) offset += separator_px;
    const GrayImage& im = images[i];
    for (int r = 0; r < height; ++r)
      for (int c = 0; c < im.width(); ++c) out.at(r, offset + c) = im.at(r, c);
    offset += im.width();
  }
  return out;
}

GrayImage crop(const GrayImage& image, int top, int left, int height,
               int width) {
  if (top < 0 || left < 0 || height <= 0 || width <= 0 ||
      top + height > image.height() || left + width > image.width())
    throw DataError("crop: window out of bounds");
  GrayImage out(height, width);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) out.at(r, c) = image.at(top + r, left + c);
  return out;
}

}  // namespace htrner
