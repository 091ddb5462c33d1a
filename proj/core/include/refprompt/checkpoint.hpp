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

#ifndef REFPROMPT_CHECKPOINT_HPP_
#define REFPROMPT_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "refprompt/params.hpp"

namespace refprompt::ckpt {

/// Metadata stored alongside the arrays. config_text is the canonical
/// configuration the run used, so a checkpoint is self-describing: tools can
/// rebuild the model without the original config file.
struct CheckpointMeta {
  int format_version = 1;
  std::string config_hash;
  std::string config_text;
  std::string optimizer;
  std::uint64_t seed = 0;
  int epoch = 0;
  std::int64_t step = 0;
  std::vector<double> loss_history;  // per-step totals, full runs only
};

struct NamedArray {
  std::string name;
  nn::TensorShape shape;
  std::vector<double> values;
};

/// Binary container: fixed magic, a JSON metadata block, then named f64
/// arrays in the order given. Doubles are dumped as raw little-endian bytes,
/// so save -> load round trips are bit-exact.
void write_archive(const std::filesystem::path& path,
                   const CheckpointMeta& meta,
                   std::span<const NamedArray> arrays);

struct Archive {
  CheckpointMeta meta;
  std::vector<NamedArray> arrays;
};

Archive read_archive(const std::filesystem::path& path);

CheckpointMeta read_meta(const std::filesystem::path& path);

/// Parameter arrays ("param.<name>") for every parameter in the store,
/// frozen ones included, in the store's deterministic order.
std::vector<NamedArray> parameter_arrays(const nn::ParameterStore& store);

void save_checkpoint(const std::filesystem::path& path,
                     const CheckpointMeta& meta,
                     const nn::ParameterStore& store);

/// Overwrites the values of every parameter from the archive. Throws
/// std::runtime_error when a parameter is missing from the archive, an
/// archived parameter is unknown, or shapes differ. Non-"param." arrays are
/// ignored (they belong to the optimizer).
CheckpointMeta load_checkpoint(const std::filesystem::path& path,
                               nn::ParameterStore& store);

}  // namespace refprompt::ckpt

#endif  // REFPROMPT_CHECKPOINT_HPP_
