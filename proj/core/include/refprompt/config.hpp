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

#ifndef REFPROMPT_CONFIG_HPP_
#define REFPROMPT_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "refprompt/losses.hpp"

namespace refprompt::cfg {

enum class Arm { kGroundingOnly, kBoxOnly, kBoxPlusContra };

std::string arm_name(Arm arm);
Arm arm_from_name(const std::string& name);

/// Everything a run needs, expressed as a flat key=value document. Every key
/// has a default; parsing an unknown key is a hard error.
struct RunConfig {
  // data.*: synthetic dataset generation / location.
  std::string data_dir;                 // data.dir
  int data_videos = 4;                  // data.videos
  int data_frames = 8;                  // data.frames
  int data_objects = 2;                 // data.objects
  int data_size = 64;                   // data.size
  bool data_motion_only_pairs = false;  // data.motion_only_pairs
  std::uint64_t data_seed = 7;          // data.seed

  // model.*: proposal-network dimensions.
  int model_dim = 64;        // model.dim
  int model_patch = 8;       // model.patch
  int model_queries = 8;     // model.queries
  int model_heads = 4;       // model.heads
  int model_layers = 6;      // model.layers
  int model_l_max = 12;      // model.l_max
  int model_ffn_hidden = 256;  // model.ffn_hidden
  int model_prompt_dim = 64;   // model.prompt_dim
  int model_fourier_freqs = 8;  // model.fourier_freqs
  bool model_zero_init_residual = true;  // model.zero_init_residual

  // loss.*: objective weights and contrastive options.
  loss::LossWeights weights;          // loss.lambda_{l1,giou,textcon,modalcon,conf}
  loss::ContrastiveOptions contrast;  // loss.margin, loss.normalize_embeddings

  // train.*: optimization schedule.
  double lr = 1e-4;                         // train.lr
  int epochs = 12;                          // train.epochs
  int batch = 1;                            // train.batch (only 1 supported)
  int clip_len = 8;                         // train.clip_len
  std::uint64_t seed = 7;                   // train.seed
  std::string optimizer = "sgd_momentum";   // train.optimizer
  double momentum = 0.9;                    // train.momentum
  Arm arm = Arm::kBoxPlusContra;            // train.arm
  std::int64_t max_steps = 0;               // train.max_steps (0 = full run)
  double grad_clip = 0.0;                   // train.grad_clip (0 = off)
  int warmup_steps = 0;                     // train.warmup_steps (0 = off)

  // run.* / eval.*
  std::string adapter = "oracle";           // run.adapter
  std::string protocol = "davis_style";     // eval.protocol

  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

/// Parses a flat key=value document. Blank lines and lines starting with '#'
/// are ignored; inline trailing '# ...' comments are not supported (values may
/// legitimately contain '#'). Unknown or duplicate keys throw
/// std::invalid_argument naming the key.
RunConfig parse_config(const std::string& text);

RunConfig load_config(const std::filesystem::path& path);

/// Every key in sorted order with the config's current values; parsing this
/// text reproduces the config. This is the form that gets hashed and embedded
/// in checkpoints.
std::string canonical_text(const RunConfig& cfg);

/// FNV-1a 64-bit hash of canonical_text, as 16 lowercase hex digits.
std::string config_hash(const RunConfig& cfg);

/// Human-readable key reference: one line per key with default and doc.
std::string describe_keys();

}  // namespace refprompt::cfg

#endif  // REFPROMPT_CONFIG_HPP_
