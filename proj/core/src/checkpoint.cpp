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

#include "refprompt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace refprompt::ckpt {
namespace {

constexpr char kMagic[8] = {'R', 'P', 'C', 'K', 'P', 'T', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xffu));
  out.push_back(static_cast<char>((v >> 8) & 0xffu));
  out.push_back(static_cast<char>((v >> 16) & 0xffu));
  out.push_back(static_cast<char>((v >> 24) & 0xffu));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
}

class Reader {
 public:
  Reader(const std::string& data, const std::filesystem::path& path)
      : data_(data), path_(path) {}

  std::uint32_t u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(data_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  double f64() {
    require(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(
                  static_cast<unsigned char>(data_[pos_ + i]))
              << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::string bytes(std::size_t n) {
    require(n);
    std::string out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void require(std::size_t n) {
    if (pos_ + n > data_.size()) {
      throw std::runtime_error("truncated checkpoint: " + path_.string());
    }
  }

  const std::string& data_;
  std::filesystem::path path_;
  std::size_t pos_ = 0;
};

nlohmann::json meta_to_json(const CheckpointMeta& meta) {
  nlohmann::json j;
  j["format_version"] = meta.format_version;
  j["config_hash"] = meta.config_hash;
  j["config_text"] = meta.config_text;
  j["optimizer"] = meta.optimizer;
  j["seed"] = meta.seed;
  j["epoch"] = meta.epoch;
  j["step"] = meta.step;
  j["loss_history"] = meta.loss_history;
  return j;
}

CheckpointMeta meta_from_json(const nlohmann::json& j) {
  CheckpointMeta meta;
  meta.format_version = j.at("format_version").get<int>();
  meta.config_hash = j.at("config_hash").get<std::string>();
  meta.config_text = j.at("config_text").get<std::string>();
  meta.optimizer = j.at("optimizer").get<std::string>();
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.epoch = j.at("epoch").get<int>();
  meta.step = j.at("step").get<std::int64_t>();
  meta.loss_history = j.at("loss_history").get<std::vector<double>>();
  return meta;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

}  // namespace

void write_archive(const std::filesystem::path& path,
                   const CheckpointMeta& meta,
                   std::span<const NamedArray> arrays) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  const std::string meta_text = meta_to_json(meta).dump();
  put_u32(out, static_cast<std::uint32_t>(meta_text.size()));
  out += meta_text;
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& arr : arrays) {
    if (arr.values.size() != static_cast<std::size_t>(arr.shape.size())) {
      throw std::runtime_error("array size mismatch for " + arr.name);
    }
    put_u32(out, static_cast<std::uint32_t>(arr.name.size()));
    out += arr.name;
    put_u32(out, static_cast<std::uint32_t>(arr.shape.rows));
    put_u32(out, static_cast<std::uint32_t>(arr.shape.cols));
    for (double v : arr.values) {
      put_f64(out, v);
    }
  }
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw std::runtime_error("cannot write checkpoint: " + path.string());
  }
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) {
    throw std::runtime_error("short write for checkpoint: " + path.string());
  }
}

Archive read_archive(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Reader reader(data, path);
  if (reader.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("bad checkpoint magic: " + path.string());
  }
  Archive archive;
  const std::uint32_t meta_len = reader.u32();
  archive.meta =
      meta_from_json(nlohmann::json::parse(reader.bytes(meta_len)));
  const std::uint32_t count = reader.u32();
  archive.arrays.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray arr;
    const std::uint32_t name_len = reader.u32();
    arr.name = reader.bytes(name_len);
    arr.shape.rows = static_cast<int>(reader.u32());
    arr.shape.cols = static_cast<int>(reader.u32());
    arr.values.resize(static_cast<std::size_t>(arr.shape.size()));
    for (double& v : arr.values) {
      v = reader.f64();
    }
    archive.arrays.push_back(std::move(arr));
  }
  if (!reader.done()) {
    throw std::runtime_error("trailing bytes in checkpoint: " + path.string());
  }
  return archive;
}

CheckpointMeta read_meta(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Reader reader(data, path);
  if (reader.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
    throw std::runtime_error("bad checkpoint magic: " + path.string());
  }
  const std::uint32_t meta_len = reader.u32();
  return meta_from_json(nlohmann::json::parse(reader.bytes(meta_len)));
}

std::vector<NamedArray> parameter_arrays(const nn::ParameterStore& store) {
  std::vector<NamedArray> arrays;
  for (const nn::Parameter* p : store.all()) {
    arrays.push_back(NamedArray{"param." + p->name, p->shape, p->value});
  }
  return arrays;
}

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointMeta& meta,
                     const nn::ParameterStore& store) {
  const std::vector<NamedArray> arrays = parameter_arrays(store);
  write_archive(path, meta, arrays);
}

CheckpointMeta load_checkpoint(const std::filesystem::path& path,
                               nn::ParameterStore& store) {
  Archive archive = read_archive(path);
  std::unordered_set<std::string> seen;
  for (NamedArray& arr : archive.arrays) {
    if (!arr.name.starts_with("param.")) {
      continue;
    }
    const std::string name = arr.name.substr(6);
    if (!store.contains(name)) {
      throw std::runtime_error("checkpoint has unknown parameter: " + name);
    }
    nn::Parameter& p = store.at(name);
    if (p.shape.rows != arr.shape.rows || p.shape.cols != arr.shape.cols) {
      throw std::runtime_error("checkpoint shape mismatch for " + name);
    }
    p.value = std::move(arr.values);
    seen.insert(name);
  }
  for (const nn::Parameter* p : store.all()) {
    if (!seen.contains(p->name)) {
      throw std::runtime_error("checkpoint missing parameter: " + p->name);
    }
  }
  return archive.meta;
}

}  // namespace refprompt::ckpt
