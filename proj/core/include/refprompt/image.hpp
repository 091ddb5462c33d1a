// Copyright 2026 The RefPrompt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REFPROMPT_IMAGE_HPP
#define REFPROMPT_IMAGE_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

namespace refprompt {

/// 8-bit RGB image, row-major HxWx3.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(3u * h * w, 0) {}

  std::uint8_t& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const Image&) const = default;
};

/// Single-channel binary mask; 0 = background, 255 = object.
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  Mask() = default;
  Mask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0) {}

  bool test(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int y, int x, bool on) {
    data[static_cast<std::size_t>(y) * width + x] = on ? 255 : 0;
  }
  std::size_t area() const;
  bool empty_mask() const { return area() == 0; }
  bool operator==(const Mask&) const = default;
};

/// Per-pixel values in [0,1], as returned by segmentation adapters.
struct SoftMask {
  int height = 0;
  int width = 0;
  std::vector<double> data;

  SoftMask() = default;
  SoftMask(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w, 0.0) {}
};

Mask binarize(const SoftMask& soft, double threshold = 0.5);

// Lossless portable formats: binary PPM (P6) for RGB, binary PGM (P5) for masks.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_pgm(const std::filesystem::path& path);

}  // namespace refprompt

#endif  // REFPROMPT_IMAGE_HPP
