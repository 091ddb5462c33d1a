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

#include "refprompt/config.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <vector>

namespace refprompt::cfg {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_bool(bool v) { return v ? "true" : "false"; }

double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + value.size() || value.empty()) {
    throw std::invalid_argument("config key " + key +
                                ": not a number: " + value);
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int v{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw std::invalid_argument("config key " + key +
                                ": not an integer: " + value);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config key " + key +
                              ": expected true/false: " + value);
}

struct KeySpec {
  std::string name;
  std::string doc;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// Sorted by key name; canonical_text relies on this order.
const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"data.dir", "dataset directory (manifest.json inside)",
       [](const RunConfig& c) { return c.data_dir; },
       [](RunConfig& c, const std::string& v) { c.data_dir = v; }},
      {"data.frames", "frames per generated video (4..32)",
       [](const RunConfig& c) { return std::to_string(c.data_frames); },
       [](RunConfig& c, const std::string& v) {
         c.data_frames = parse_int<int>("data.frames", v);
       }},
      {"data.motion_only_pairs",
       "generate expression pairs differing only in the motion word",
       [](const RunConfig& c) { return format_bool(c.data_motion_only_pairs); },
       [](RunConfig& c, const std::string& v) {
         c.data_motion_only_pairs = parse_bool("data.motion_only_pairs", v);
       }},
      {"data.objects", "objects (= expressions) per video (2..4)",
       [](const RunConfig& c) { return std::to_string(c.data_objects); },
       [](RunConfig& c, const std::string& v) {
         c.data_objects = parse_int<int>("data.objects", v);
       }},
      {"data.seed", "dataset generation seed",
       [](const RunConfig& c) { return std::to_string(c.data_seed); },
       [](RunConfig& c, const std::string& v) {
         c.data_seed = parse_int<std::uint64_t>("data.seed", v);
       }},
      {"data.size", "square frame size in pixels (64 or 128)",
       [](const RunConfig& c) { return std::to_string(c.data_size); },
       [](RunConfig& c, const std::string& v) {
         c.data_size = parse_int<int>("data.size", v);
       }},
      {"data.videos", "number of videos to generate",
       [](const RunConfig& c) { return std::to_string(c.data_videos); },
       [](RunConfig& c, const std::string& v) {
         c.data_videos = parse_int<int>("data.videos", v);
       }},
      {"eval.protocol", "metric protocol: davis_style or a2d_style",
       [](const RunConfig& c) { return c.protocol; },
       [](RunConfig& c, const std::string& v) { c.protocol = v; }},
      {"loss.lambda_conf", "confidence supervision weight",
       [](const RunConfig& c) { return format_double(c.weights.lambda_cls); },
       [](RunConfig& c, const std::string& v) {
         c.weights.lambda_cls = parse_double("loss.lambda_conf", v);
       }},
      {"loss.lambda_giou", "generalized-IoU box term weight",
       [](const RunConfig& c) { return format_double(c.weights.lambda_g); },
       [](RunConfig& c, const std::string& v) {
         c.weights.lambda_g = parse_double("loss.lambda_giou", v);
       }},
      {"loss.lambda_l1", "L1 box term weight",
       [](const RunConfig& c) { return format_double(c.weights.lambda_r); },
       [](RunConfig& c, const std::string& v) {
         c.weights.lambda_r = parse_double("loss.lambda_l1", v);
       }},
      {"loss.lambda_modalcon", "video-level contrastive weight",
       [](const RunConfig& c) { return format_double(c.weights.lambda_v); },
       [](RunConfig& c, const std::string& v) {
         c.weights.lambda_v = parse_double("loss.lambda_modalcon", v);
       }},
      {"loss.lambda_textcon", "frame-level contrastive weight",
       [](const RunConfig& c) { return format_double(c.weights.lambda_f); },
       [](RunConfig& c, const std::string& v) {
         c.weights.lambda_f = parse_double("loss.lambda_textcon", v);
       }},
      {"loss.margin", "triplet margin (0 matches the formulation)",
       [](const RunConfig& c) { return format_double(c.contrast.margin); },
       [](RunConfig& c, const std::string& v) {
         c.contrast.margin = parse_double("loss.margin", v);
       }},
      {"loss.normalize_embeddings",
       "unit-normalize embeddings before contrastive distances",
       [](const RunConfig& c) {
         return format_bool(c.contrast.normalize_embeddings);
       },
       [](RunConfig& c, const std::string& v) {
         c.contrast.normalize_embeddings =
             parse_bool("loss.normalize_embeddings", v);
       }},
      {"model.dim", "shared embedding width",
       [](const RunConfig& c) { return std::to_string(c.model_dim); },
       [](RunConfig& c, const std::string& v) {
         c.model_dim = parse_int<int>("model.dim", v);
       }},
      {"model.ffn_hidden", "decoder feed-forward hidden width",
       [](const RunConfig& c) { return std::to_string(c.model_ffn_hidden); },
       [](RunConfig& c, const std::string& v) {
         c.model_ffn_hidden = parse_int<int>("model.ffn_hidden", v);
       }},
      {"model.fourier_freqs", "Fourier frequencies per box coordinate",
       [](const RunConfig& c) { return std::to_string(c.model_fourier_freqs); },
       [](RunConfig& c, const std::string& v) {
         c.model_fourier_freqs = parse_int<int>("model.fourier_freqs", v);
       }},
      {"model.heads", "attention heads",
       [](const RunConfig& c) { return std::to_string(c.model_heads); },
       [](RunConfig& c, const std::string& v) {
         c.model_heads = parse_int<int>("model.heads", v);
       }},
      {"model.l_max", "token budget per sentence",
       [](const RunConfig& c) { return std::to_string(c.model_l_max); },
       [](RunConfig& c, const std::string& v) {
         c.model_l_max = parse_int<int>("model.l_max", v);
       }},
      {"model.layers", "decoder layers",
       [](const RunConfig& c) { return std::to_string(c.model_layers); },
       [](RunConfig& c, const std::string& v) {
         c.model_layers = parse_int<int>("model.layers", v);
       }},
      {"model.patch", "square patch size for the visual backbone",
       [](const RunConfig& c) { return std::to_string(c.model_patch); },
       [](RunConfig& c, const std::string& v) {
         c.model_patch = parse_int<int>("model.patch", v);
       }},
      {"model.prompt_dim", "prompt embedding width",
       [](const RunConfig& c) { return std::to_string(c.model_prompt_dim); },
       [](RunConfig& c, const std::string& v) {
         c.model_prompt_dim = parse_int<int>("model.prompt_dim", v);
       }},
      {"model.queries", "object queries per frame",
       [](const RunConfig& c) { return std::to_string(c.model_queries); },
       [](RunConfig& c, const std::string& v) {
         c.model_queries = parse_int<int>("model.queries", v);
       }},
      {"model.zero_init_residual",
       "zero residual output projections (decoder = identity at init)",
       [](const RunConfig& c) {
         return format_bool(c.model_zero_init_residual);
       },
       [](RunConfig& c, const std::string& v) {
         c.model_zero_init_residual =
             parse_bool("model.zero_init_residual", v);
       }},
      {"run.adapter", "segmenter adapter name: oracle or box_fill",
       [](const RunConfig& c) { return c.adapter; },
       [](RunConfig& c, const std::string& v) { c.adapter = v; }},
      {"train.arm",
       "objective arm: grounding_only, box_only, or box_plus_contra",
       [](const RunConfig& c) { return arm_name(c.arm); },
       [](RunConfig& c, const std::string& v) { c.arm = arm_from_name(v); }},
      {"train.batch", "clips per optimizer step (only 1 supported)",
       [](const RunConfig& c) { return std::to_string(c.batch); },
       [](RunConfig& c, const std::string& v) {
         c.batch = parse_int<int>("train.batch", v);
       }},
      {"train.clip_len", "contiguous frames sampled per training step",
       [](const RunConfig& c) { return std::to_string(c.clip_len); },
       [](RunConfig& c, const std::string& v) {
         c.clip_len = parse_int<int>("train.clip_len", v);
       }},
      {"train.epochs", "passes over all (video, expression) pairs",
       [](const RunConfig& c) { return std::to_string(c.epochs); },
       [](RunConfig& c, const std::string& v) {
         c.epochs = parse_int<int>("train.epochs", v);
       }},
      {"train.grad_clip", "gradient-norm clip, 0 disables",
       [](const RunConfig& c) { return format_double(c.grad_clip); },
       [](RunConfig& c, const std::string& v) {
         c.grad_clip = parse_double("train.grad_clip", v);
       }},
      {"train.grad_clip_mode",
       "norm the clip bounds: global (one norm over all gradients) or param "
       "(each parameter tensor clipped on its own)",
       [](const RunConfig& c) { return c.grad_clip_mode; },
       [](RunConfig& c, const std::string& v) { c.grad_clip_mode = v; }},
      {"train.lr", "learning rate",
       [](const RunConfig& c) { return format_double(c.lr); },
       [](RunConfig& c, const std::string& v) {
         c.lr = parse_double("train.lr", v);
       }},
      {"train.max_steps", "hard step cap, 0 means run all epochs",
       [](const RunConfig& c) { return std::to_string(c.max_steps); },
       [](RunConfig& c, const std::string& v) {
         c.max_steps = parse_int<std::int64_t>("train.max_steps", v);
       }},
      {"train.momentum", "momentum for sgd_momentum",
       [](const RunConfig& c) { return format_double(c.momentum); },
       [](RunConfig& c, const std::string& v) {
         c.momentum = parse_double("train.momentum", v);
       }},
      {"train.optimizer", "optimizer: sgd_momentum (reference) or adam",
       [](const RunConfig& c) { return c.optimizer; },
       [](RunConfig& c, const std::string& v) { c.optimizer = v; }},
      {"train.seed", "model init + training stream seed",
       [](const RunConfig& c) { return std::to_string(c.seed); },
       [](RunConfig& c, const std::string& v) {
         c.seed = parse_int<std::uint64_t>("train.seed", v);
       }},
      {"train.warmup_steps", "linear learning-rate warmup, 0 disables",
       [](const RunConfig& c) { return std::to_string(c.warmup_steps); },
       [](RunConfig& c, const std::string& v) {
         c.warmup_steps = parse_int<int>("train.warmup_steps", v);
       }},
  };
  return table;
}

const KeySpec* find_key(const std::string& name) {
  for (const KeySpec& spec : key_table()) {
    if (spec.name == name) return &spec;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::kGroundingOnly: return "grounding_only";
    case Arm::kBoxOnly: return "box_only";
    case Arm::kBoxPlusContra: return "box_plus_contra";
  }
  throw std::invalid_argument("bad arm enum");
}

Arm arm_from_name(const std::string& name) {
  if (name == "grounding_only") return Arm::kGroundingOnly;
  if (name == "box_only") return Arm::kBoxOnly;
  if (name == "box_plus_contra") return Arm::kBoxPlusContra;
  throw std::invalid_argument(
      "unknown arm: " + name +
      " (expected grounding_only, box_only, or box_plus_contra)");
}

void RunConfig::validate() const {
  weights.validate();
  if (contrast.margin < 0.0) {
    throw std::invalid_argument("loss.margin must be >= 0");
  }
  if (data_videos < 1) {
    throw std::invalid_argument("data.videos must be >= 1");
  }
  if (data_frames < 4 || data_frames > 32) {
    throw std::invalid_argument("data.frames must be in [4, 32]");
  }
  if (data_objects < 2 || data_objects > 4) {
    throw std::invalid_argument("data.objects must be in [2, 4]");
  }
  if (data_size != 64 && data_size != 128) {
    throw std::invalid_argument("data.size must be 64 or 128");
  }
  if (model_dim < 1 || model_patch < 1 || model_queries < 1 ||
      model_heads < 1 || model_layers < 1 || model_l_max < 3 ||
      model_ffn_hidden < 1 || model_prompt_dim < 1 ||
      model_fourier_freqs < 1) {
    throw std::invalid_argument("model.* dimensions must be positive");
  }
  if (model_dim % model_heads != 0) {
    throw std::invalid_argument("model.dim must be divisible by model.heads");
  }
  if (data_size % model_patch != 0) {
    throw std::invalid_argument("data.size must be divisible by model.patch");
  }
  if (!(lr > 0.0)) {
    throw std::invalid_argument("train.lr must be > 0");
  }
  if (epochs < 0) {
    throw std::invalid_argument("train.epochs must be >= 0");
  }
  if (batch != 1) {
    throw std::invalid_argument("train.batch: only batch size 1 is supported");
  }
  if (clip_len < 1) {
    throw std::invalid_argument("train.clip_len must be >= 1");
  }
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("train.momentum must be in [0, 1)");
  }
  if (optimizer != "sgd_momentum" && optimizer != "adam") {
    throw std::invalid_argument("train.optimizer must be sgd_momentum or adam");
  }
  if (max_steps < 0) {
    throw std::invalid_argument("train.max_steps must be >= 0");
  }
  if (grad_clip < 0.0) {
    throw std::invalid_argument("train.grad_clip must be >= 0");
  }
  if (warmup_steps < 0) {
    throw std::invalid_argument("train.warmup_steps must be >= 0");
  }
  if (adapter != "oracle" && adapter != "box_fill") {
    throw std::invalid_argument("run.adapter must be oracle or box_fill");
  }
  if (protocol != "davis_style" && protocol != "a2d_style") {
    throw std::invalid_argument("eval.protocol must be davis_style or a2d_style");
  }
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::unordered_set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value, got: " + stripped);
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    const KeySpec* spec = find_key(key);
    if (spec == nullptr) {
      throw std::invalid_argument("unknown config key: " + key);
    }
    if (!seen.insert(key).second) {
      throw std::invalid_argument("duplicate config key: " + key);
    }
    spec->set(cfg, value);
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config: " + path.string());
  }
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string canonical_text(const RunConfig& cfg) {
  std::string out;
  for (const KeySpec& spec : key_table()) {
    out += spec.name;
    out += '=';
    out += spec.get(cfg);
    out += '\n';
  }
  return out;
}

std::string config_hash(const RunConfig& cfg) {
  const std::string text = canonical_text(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

std::string describe_keys() {
  RunConfig defaults;
  std::string out;
  for (const KeySpec& spec : key_table()) {
    out += spec.name;
    out += " (default ";
    const std::string d = spec.get(defaults);
    out += d.empty() ? "<empty>" : d;
    out += "): ";
    out += spec.doc;
    out += '\n';
  }
  return out;
}

}  // namespace refprompt::cfg
