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

#ifndef REFPROMPT_LOSSES_HPP_
#define REFPROMPT_LOSSES_HPP_

#include <span>
#include <vector>

#include "refprompt/geometry.hpp"
#include "refprompt/graph.hpp"

namespace refprompt::loss {

struct LossWeights {
  double lambda_r = 5.0;    // L1 box regression
  double lambda_g = 2.0;    // generalized-IoU term
  double lambda_f = 0.01;   // frame-level contrastive term
  double lambda_v = 0.1;    // video-level contrastive term
  double lambda_cls = 1.0;  // confidence supervision (plumbing)

  /// Throws std::invalid_argument if any weight is negative.
  void validate() const;
};

struct ContrastiveOptions {
  double margin = 0.0;  // the formulas carry no margin; > 0 is an extension
  bool normalize_embeddings = false;
};

struct TripletDistances {
  double d_p = 0.0;  // anchor-positive Euclidean distance
  double d_n = 0.0;  // anchor-negative Euclidean distance
};

/// max(0, d_p - d_n + margin). Subgradient 0 exactly at the kink.
double triplet(const TripletDistances& d, double margin = 0.0);

/// Sum over frames of lambda_r * |B - B_gt|_1 + lambda_g * (1 - GIoU).
/// Throws std::invalid_argument on a length mismatch.
double box_loss(std::span<const geom::BoundingBox> pred,
                std::span<const geom::BoundingBox> gt, const LossWeights& w);

/// Sum over frames of the triplet kernel on flattened embeddings:
/// anchor = predicted-box prompt, positive = ground-truth-box prompt,
/// negative = the other sentence's predicted-box prompt.
double textcon_loss(std::span<const std::vector<double>> anchor,
                    std::span<const std::vector<double>> positive,
                    std::span<const std::vector<double>> negative,
                    const ContrastiveOptions& opts = {});

/// Triplet kernel on the video content feature vs the two sentence features.
double modalcon_loss(const std::vector<double>& video_feature,
                     const std::vector<double>& positive_sentence,
                     const std::vector<double>& negative_sentence,
                     const ContrastiveOptions& opts = {});

struct LossComponents {
  double box = 0.0;
  double cls = 0.0;
  double textcon = 0.0;
  double modalcon = 0.0;
};

struct LossBreakdown {
  double box = 0.0;       // raw components
  double cls = 0.0;
  double textcon = 0.0;
  double modalcon = 0.0;
  double total = 0.0;     // box + l_cls*cls + l_f*textcon + l_v*modalcon
};

LossBreakdown total_loss(const LossComponents& c, const LossWeights& w);

// ---- Graph builders (training path) ----------------------------------
// All return 1x1 tensors on g; gradients flow into the prediction tensors.

/// Euclidean distance between two equal-shape row vectors, optionally on
/// unit-normalized embeddings.
nn::Tensor distance_graph(nn::Graph& g, nn::Tensor a, nn::Tensor b,
                          const ContrastiveOptions& opts = {});

/// max(0, d_p - d_n + margin) with subgradient 0 at the kink.
nn::Tensor triplet_graph(nn::Graph& g, nn::Tensor d_p, nn::Tensor d_n,
                         double margin = 0.0);

/// 1 - GIoU of a differentiable 1x4 cxcywh box against a fixed box.
nn::Tensor giou_loss_graph(nn::Graph& g, nn::Tensor pred_cxcywh,
                           const geom::BoundingBox& gt);

nn::Tensor box_loss_graph(nn::Graph& g, std::span<const nn::Tensor> pred_boxes,
                          std::span<const geom::BoundingBox> gt,
                          const LossWeights& w);

nn::Tensor textcon_loss_graph(nn::Graph& g, std::span<const nn::Tensor> anchor,
                              std::span<const nn::Tensor> positive,
                              std::span<const nn::Tensor> negative,
                              const ContrastiveOptions& opts = {});

nn::Tensor modalcon_loss_graph(nn::Graph& g, nn::Tensor video_feature,
                               nn::Tensor positive_sentence,
                               nn::Tensor negative_sentence,
                               const ContrastiveOptions& opts = {});

/// Sum over frames of per-frame mean binary cross-entropy on confidence
/// logits; positive_index[t] marks the target query of frame t.
nn::Tensor confidence_loss_graph(nn::Graph& g,
                                 std::span<const nn::Tensor> conf_logits,
                                 std::span<const int> positive_index);

}  // namespace refprompt::loss

#endif  // REFPROMPT_LOSSES_HPP_
