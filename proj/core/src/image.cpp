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

#include "refprompt/image.hpp"

#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>

namespace refprompt {

namespace {

void io_fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error(what + ": " + path.string());
}

// Reads one whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& is) {
  std::string tok;
  for (;;) {
    int c = is.get();
    if (c == EOF) return tok;
    if (c == '#') {
      std::string line;
      std::getline(is, line);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

}  // namespace

std::size_t Mask::area() const {
  std::size_t n = 0;
  for (auto v : data) n += v != 0;
  return n;
}

Mask binarize(const SoftMask& soft, double threshold) {
  Mask out(soft.height, soft.width);
  for (std::size_t i = 0; i < soft.data.size(); ++i) {
    out.data[i] = soft.data[i] >= threshold ? 255 : 0;
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) io_fail(path, "cannot open for writing");
  os << "P6\n" << image.width << " " << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.data.data()),
           static_cast<std::streamsize>(image.data.size()));
  if (!os) io_fail(path, "write failed");
}

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail(path, "cannot open for reading");
  if (next_token(is) != "P6") io_fail(path, "not a binary PPM");
  Image image;
  image.width = std::stoi(next_token(is));
  image.height = std::stoi(next_token(is));
  if (next_token(is) != "255") io_fail(path, "unsupported maxval");
  image.data.resize(3u * image.width * image.height);
  is.read(reinterpret_cast<char*>(image.data.data()),
          static_cast<std::streamsize>(image.data.size()));
  if (is.gcount() != static_cast<std::streamsize>(image.data.size())) {
    io_fail(path, "truncated PPM payload");
  }
  return image;
}

void write_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::ofstream os(path, std::ios::binary);
  if (!os) io_fail(path, "cannot open for writing");
  os << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(mask.data.data()),
           static_cast<std::streamsize>(mask.data.size()));
  if (!os) io_fail(path, "write failed");
}

Mask read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail(path, "cannot open for reading");
  if (next_token(is) != "P5") io_fail(path, "not a binary PGM");
  Mask mask;
  mask.width = std::stoi(next_token(is));
  mask.height = std::stoi(next_token(is));
  if (next_token(is) != "255") io_fail(path, "unsupported maxval");
  mask.data.resize(static_cast<std::size_t>(mask.width) * mask.height);
  is.read(reinterpret_cast<char*>(mask.data.data()),
          static_cast<std::streamsize>(mask.data.size()));
  if (is.gcount() != static_cast<std::streamsize>(mask.data.size())) {
    io_fail(path, "truncated PGM payload");
  }
  return mask;
}

}  // namespace refprompt
