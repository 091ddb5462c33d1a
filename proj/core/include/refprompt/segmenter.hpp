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

#ifndef REFPROMPT_SEGMENTER_HPP_
#define REFPROMPT_SEGMENTER_HPP_

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "refprompt/geometry.hpp"
#include "refprompt/graph.hpp"
#include "refprompt/image.hpp"
#include "refprompt/params.hpp"
#include "refprompt/synthdata.hpp"

namespace refprompt::seg {

struct SegmenterConfig {
  int height = 64;
  int width = 64;
  int patch = 8;
  int prompt_dim = 64;    // embedding dimension D_p
  int fourier_freqs = 8;  // frequencies per box-corner coordinate
  int text_dim = 64;      // dimension of the pooled sentence vector z

  int n_visual_tokens() const { return (height / patch) * (width / patch); }
  int patch_values() const { return patch * patch * 3; }
  int fourier_values() const { return 8 * fourier_freqs; }  // sin+cos, 4 coords

  void validate() const;
};

/// The frozen half of the system: a differentiable box-prompt encoder, a
/// frozen patch image encoder, parameter-free video aggregation, and the
/// frozen sentence-feature map. Every parameter registered here is
/// non-trainable; gradients flow through these functions into box
/// coordinates but never into these parameters.
class FrozenSegmenterStack {
 public:
  FrozenSegmenterStack(const SegmenterConfig& config,
                       nn::ParameterStore& store, std::uint64_t seed);

  const SegmenterConfig& config() const { return config_; }

  /// Fourier corner encoding of a 1x4 cxcywh box tensor followed by a frozen
  /// linear map; differentiable in the box fields. Returns 1 x prompt_dim.
  nn::Tensor prompt_encode(nn::Graph& g, nn::Tensor box_cxcywh) const;

  /// Convenience overload for a fixed (non-differentiable) box; validates it.
  nn::Tensor prompt_encode(nn::Graph& g, const geom::BoundingBox& box) const;

  /// Frozen patch projection -> n_visual_tokens x prompt_dim.
  nn::Tensor frozen_image_encode(nn::Graph& g, const Image& frame) const;

  /// Per frame: parameter-free scaled dot-product attention with the prompt
  /// as the query over that frame's features; then the mean over frames.
  /// prompts[t] is 1 x prompt_dim; features[t] is n_visual_tokens x
  /// prompt_dim. Returns 1 x prompt_dim.
  nn::Tensor aggregate_video_feature(
      nn::Graph& g, std::span<const nn::Tensor> prompts,
      std::span<const nn::Tensor> frame_features) const;

  /// Frozen linear map of a pooled sentence vector to prompt space.
  std::vector<double> sentence_feature(const std::vector<double>& z) const;

 private:
  SegmenterConfig config_;
  nn::ParameterStore* store_;
};

/// Ground-truth-backed prompted segmentation: returns the mask of the object
/// whose ground-truth box has the highest IoU with the prompt (ties: lowest
/// object index), or the empty mask when every IoU is zero.
Mask oracle_segment(const std::vector<geom::BoundingBox>& gt_boxes,
                    const std::vector<Mask>& gt_masks,
                    const geom::BoundingBox& prompt, int height, int width);

/// Plug-in boundary for prompted segmentation backends. Implementations must
/// be pure per call and must never expose trainable parameters. The frame
/// index accompanies the frame so ground-truth-backed adapters can look up
/// per-frame state; content-based adapters ignore it.
class SegmentAdapter {
 public:
  virtual ~SegmentAdapter() = default;
  virtual std::string name() const = 0;
  virtual bool concurrency_safe() const = 0;
  virtual SoftMask segment(int frame_index, const Image& frame,
                           const geom::BoundingBox& prompt) const = 0;
};

/// Reference adapter: oracle_segment over one video's ground truth.
class OracleAdapter : public SegmentAdapter {
 public:
  explicit OracleAdapter(const data::VideoSample& sample);
  std::string name() const override { return "oracle"; }
  bool concurrency_safe() const override { return true; }
  SoftMask segment(int frame_index, const Image& frame,
                   const geom::BoundingBox& prompt) const override;

 private:
  const data::VideoSample* sample_;
};

/// Ground-truth-free baseline: fills the prompt box with ones. Useful as a
/// sanity adapter; it does not claim conformance with the oracle contract.
class BoxFillAdapter : public SegmentAdapter {
 public:
  std::string name() const override { return "box_fill"; }
  bool concurrency_safe() const override { return true; }
  SoftMask segment(int frame_index, const Image& frame,
                   const geom::BoundingBox& prompt) const override;
};

/// Factory for registered adapters ("oracle", "box_fill"); throws
/// std::invalid_argument listing the known names for anything else.
std::unique_ptr<SegmentAdapter> make_adapter(const std::string& name,
                                             const data::VideoSample& sample);

}  // namespace refprompt::seg

#endif  // REFPROMPT_SEGMENTER_HPP_
