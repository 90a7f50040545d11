/*
 * Copyright 2026 GeoFuse Contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GEOFUSE_IMAGE_HPP_
#define GEOFUSE_IMAGE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "geofuse/common.hpp"

namespace geofuse {

// RGB raster with float values in [0, 1], row-major, channels interleaved.
// On disk these are 8-bit RGB PNGs; decode rounding is exactly value/255.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> px;  // height * width * 3

  Image() = default;
  Image(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), px(w * h * 3, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return px[(y * width + x) * 3 + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return px[(y * width + x) * 3 + c];
  }
  std::size_t size() const { return px.size(); }
  bool same_size(const Image& other) const {
    return width == other.width && height == other.height;
  }
  void clip01();
};

Image load_png(const std::string& path);
void save_png(const Image& img, const std::string& path);

// Quantize to 8 bits the same way save_png does; load(save(x)) == quantize(x).
Image quantized(const Image& img);

}  // namespace geofuse

#endif  // GEOFUSE_IMAGE_HPP_
