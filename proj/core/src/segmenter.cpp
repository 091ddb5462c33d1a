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

#include "refprompt/segmenter.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace refprompt::seg {

namespace {

constexpr double kFrequencyStddev = 6.0;  // a few periods across [0,1]

}  // namespace

void SegmenterConfig::validate() const {
  if (height <= 0 || width <= 0 || patch <= 0 || height % patch != 0 ||
      width % patch != 0) {
    throw std::invalid_argument(
        "segmenter config: frame size must be a multiple of the patch size");
  }
  if (prompt_dim <= 0 || fourier_freqs <= 0 || text_dim <= 0) {
    throw std::invalid_argument("segmenter config: non-positive dimension");
  }
}

FrozenSegmenterStack::FrozenSegmenterStack(const SegmenterConfig& config,
                                           nn::ParameterStore& store,
                                           std::uint64_t seed)
    : config_(config), store_(&store) {
  config_.validate();
  nn::init_normal(store.create("frozen.prompt.freq", {4, config_.fourier_freqs},
                               /*trainable=*/false),
                  seed, kFrequencyStddev);
  nn::init_xavier_uniform(
      store.create("frozen.prompt.w",
                   {config_.fourier_values(), config_.prompt_dim},
                   /*trainable=*/false),
      seed);
  nn::init_xavier_uniform(
      store.create("frozen.image.w",
                   {config_.patch_values(), config_.prompt_dim},
                   /*trainable=*/false),
      seed);
  nn::init_zeros(store.create("frozen.image.b", {1, config_.prompt_dim},
                              /*trainable=*/false));
  nn::init_xavier_uniform(
      store.create("frozen.sentence.w", {config_.text_dim, config_.prompt_dim},
                   /*trainable=*/false),
      seed);
}

nn::Tensor FrozenSegmenterStack::prompt_encode(nn::Graph& g,
                                               nn::Tensor box_cxcywh) const {
  if (box_cxcywh.rows() != 1 || box_cxcywh.cols() != 4) {
    throw std::invalid_argument("prompt_encode: box tensor must be 1x4");
  }
  // cxcywh -> (x1, y1, x2, y2) as a constant linear map.
  nn::Tensor corners = g.matmul(
      box_cxcywh, g.constant({4, 4}, {1.0, 0.0, 1.0, 0.0,      //
                                      0.0, 1.0, 0.0, 1.0,      //
                                      -0.5, 0.0, 0.5, 0.0,     //
                                      0.0, -0.5, 0.0, 0.5}));
  // Block-diagonal frequency matrix: coordinate c drives angles
  // [c*F, (c+1)*F).
  const int f = config_.fourier_freqs;
  const auto& freq = store_->at("frozen.prompt.freq");
  std::vector<double> block(static_cast<std::size_t>(4) * 4 * f, 0.0);
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < f; ++k) {
      block[static_cast<std::size_t>(c) * 4 * f + c * f + k] =
          freq.value[static_cast<std::size_t>(c) * f + k];
    }
  }
  nn::Tensor angles = g.matmul(corners, g.constant({4, 4 * f}, block));
  const std::array<nn::Tensor, 2> parts = {g.sin(angles), g.cos(angles)};
  nn::Tensor features = g.concat_cols(parts);
  return g.matmul(features, g.frozen(store_->at("frozen.prompt.w")));
}

nn::Tensor FrozenSegmenterStack::prompt_encode(
    nn::Graph& g, const geom::BoundingBox& box) const {
  geom::validate(box);
  return prompt_encode(g, g.constant({1, 4}, {box.cx, box.cy, box.w, box.h}));
}

nn::Tensor FrozenSegmenterStack::frozen_image_encode(nn::Graph& g,
                                                     const Image& frame) const {
  if (frame.height != config_.height || frame.width != config_.width) {
    throw std::invalid_argument("frozen_image_encode: frame size mismatch");
  }
  const int p = config_.patch;
  const int nv = config_.n_visual_tokens();
  const int pv = config_.patch_values();
  std::vector<double> patches(static_cast<std::size_t>(nv) * pv, 0.0);
  const int grid_w = config_.width / p;
  for (int gy = 0; gy < config_.height / p; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      const int token = gy * grid_w + gx;
      int k = 0;
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          for (int c = 0; c < 3; ++c) {
            patches[static_cast<std::size_t>(token) * pv + k++] =
                frame.at(gy * p + y, gx * p + x, c) / 255.0;
          }
        }
      }
    }
  }
  return g.add_row(g.matmul(g.constant({nv, pv}, std::move(patches)),
                            g.frozen(store_->at("frozen.image.w"))),
                   g.frozen(store_->at("frozen.image.b")));
}

nn::Tensor FrozenSegmenterStack::aggregate_video_feature(
    nn::Graph& g, std::span<const nn::Tensor> prompts,
    std::span<const nn::Tensor> frame_features) const {
  if (prompts.size() != frame_features.size() || prompts.empty()) {
    throw std::invalid_argument(
        "aggregate_video_feature: need equal, non-zero frame counts");
  }
  nn::Tensor sum;
  for (std::size_t t = 0; t < prompts.size(); ++t) {
    nn::Tensor scores =
        g.scale(g.matmul(prompts[t], g.transpose(frame_features[t])),
                1.0 / std::sqrt(static_cast<double>(config_.prompt_dim)));
    nn::Tensor attended = g.matmul(g.softmax_rows(scores), frame_features[t]);
    sum = t == 0 ? attended : g.add(sum, attended);
  }
  return g.scale(sum, 1.0 / static_cast<double>(prompts.size()));
}

std::vector<double> FrozenSegmenterStack::sentence_feature(
    const std::vector<double>& z) const {
  if (static_cast<int>(z.size()) != config_.text_dim) {
    throw std::invalid_argument("sentence_feature: dimension mismatch");
  }
  const auto& w = store_->at("frozen.sentence.w");
  std::vector<double> out(config_.prompt_dim, 0.0);
  for (int i = 0; i < config_.text_dim; ++i) {
    for (int j = 0; j < config_.prompt_dim; ++j) {
      out[j] += z[i] * w.value[static_cast<std::size_t>(i) * config_.prompt_dim + j];
    }
  }
  return out;
}

Mask oracle_segment(const std::vector<geom::BoundingBox>& gt_boxes,
                    const std::vector<Mask>& gt_masks,
                    const geom::BoundingBox& prompt, int height, int width) {
  if (gt_boxes.size() != gt_masks.size()) {
    throw std::invalid_argument("oracle_segment: boxes/masks length mismatch");
  }
  geom::validate(prompt);
  int best = -1;
  double best_iou = 0.0;
  for (std::size_t m = 0; m < gt_boxes.size(); ++m) {
    const double v = geom::iou(prompt, gt_boxes[m]);
    if (v > best_iou) {  // strict: zero-IoU objects never match, ties keep
      best_iou = v;      // the lowest index
      best = static_cast<int>(m);
    }
  }
  if (best < 0) return Mask(height, width);
  return gt_masks[best];
}

OracleAdapter::OracleAdapter(const data::VideoSample& sample)
    : sample_(&sample) {}

SoftMask OracleAdapter::segment(int frame_index, const Image& frame,
                                const geom::BoundingBox& prompt) const {
  (void)frame;
  if (frame_index < 0 ||
      frame_index >= static_cast<int>(sample_->frames.size())) {
    throw std::out_of_range("oracle adapter: frame index " +
                            std::to_string(frame_index) + " out of range");
  }
  const Mask mask =
      oracle_segment(sample_->gt_boxes[frame_index],
                     sample_->gt_masks[frame_index], prompt, sample_->height,
                     sample_->width);
  SoftMask soft(mask.height, mask.width);
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    soft.data[i] = mask.data[i] != 0 ? 1.0 : 0.0;
  }
  return soft;
}

SoftMask BoxFillAdapter::segment(int frame_index, const Image& frame,
                                 const geom::BoundingBox& prompt) const {
  (void)frame_index;
  geom::validate(prompt);
  const geom::CornerBox c = geom::to_corners(prompt);
  SoftMask soft(frame.height, frame.width);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const double px = (x + 0.5) / frame.width;
      const double py = (y + 0.5) / frame.height;
      if (px >= c.x1 && px <= c.x2 && py >= c.y1 && py <= c.y2) {
        soft.data[static_cast<std::size_t>(y) * frame.width + x] = 1.0;
      }
    }
  }
  return soft;
}

std::unique_ptr<SegmentAdapter> make_adapter(const std::string& name,
                                             const data::VideoSample& sample) {
  if (name == "oracle") return std::make_unique<OracleAdapter>(sample);
  if (name == "box_fill") return std::make_unique<BoxFillAdapter>();
  throw std::invalid_argument("unknown adapter \"" + name +
                              "\"; known adapters: oracle, box_fill");
}

}  // namespace refprompt::seg
