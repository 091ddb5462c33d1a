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

#include "refprompt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace refprompt::loss {

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b,
                 bool normalize) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("embedding dimension mismatch");
  }
  auto unit = [](std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
      for (double& x : v) x /= n;
    }
    return v;
  };
  std::vector<double> an, bn;
  const std::vector<double>* x = &a;
  const std::vector<double>* y = &b;
  if (normalize) {
    an = unit(a);
    bn = unit(b);
    x = &an;
    y = &bn;
  }
  double s = 0.0;
  for (std::size_t i = 0; i < x->size(); ++i) {
    const double d = (*x)[i] - (*y)[i];
    s += d * d;
  }
  return std::sqrt(s);
}

nn::Tensor normalize_graph(nn::Graph& g, nn::Tensor v) {
  // Broadcast-divide a row vector by its norm: matmul the 1x1 norm with a
  // row of ones to stretch it to the vector's width.
  nn::Tensor norm = g.l2_norm(v);
  nn::Tensor ones = g.constant({1, v.cols()},
                               std::vector<double>(v.cols(), 1.0));
  return g.div(v, g.matmul(norm, ones));
}

}  // namespace

void LossWeights::validate() const {
  if (lambda_r < 0.0 || lambda_g < 0.0 || lambda_f < 0.0 || lambda_v < 0.0 ||
      lambda_cls < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

double triplet(const TripletDistances& d, double margin) {
  return std::max(0.0, d.d_p - d.d_n + margin);
}

double box_loss(std::span<const geom::BoundingBox> pred,
                std::span<const geom::BoundingBox> gt, const LossWeights& w) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("box_loss: prediction/target length mismatch");
  }
  w.validate();
  double total = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double l1 = std::abs(pred[t].cx - gt[t].cx) +
                      std::abs(pred[t].cy - gt[t].cy) +
                      std::abs(pred[t].w - gt[t].w) +
                      std::abs(pred[t].h - gt[t].h);
    total += w.lambda_r * l1 + w.lambda_g * geom::giou_loss(pred[t], gt[t]);
  }
  return total;
}

double textcon_loss(std::span<const std::vector<double>> anchor,
                    std::span<const std::vector<double>> positive,
                    std::span<const std::vector<double>> negative,
                    const ContrastiveOptions& opts) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw std::invalid_argument("textcon_loss: sequence length mismatch");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < anchor.size(); ++t) {
    TripletDistances d;
    d.d_p = euclidean(anchor[t], positive[t], opts.normalize_embeddings);
    d.d_n = euclidean(anchor[t], negative[t], opts.normalize_embeddings);
    total += triplet(d, opts.margin);
  }
  return total;
}

double modalcon_loss(const std::vector<double>& video_feature,
                     const std::vector<double>& positive_sentence,
                     const std::vector<double>& negative_sentence,
                     const ContrastiveOptions& opts) {
  TripletDistances d;
  d.d_p = euclidean(video_feature, positive_sentence,
                    opts.normalize_embeddings);
  d.d_n = euclidean(video_feature, negative_sentence,
                    opts.normalize_embeddings);
  return triplet(d, opts.margin);
}

LossBreakdown total_loss(const LossComponents& c, const LossWeights& w) {
  w.validate();
  LossBreakdown b;
  b.box = c.box;
  b.cls = c.cls;
  b.textcon = c.textcon;
  b.modalcon = c.modalcon;
  b.total = c.box + w.lambda_cls * c.cls + w.lambda_f * c.textcon +
            w.lambda_v * c.modalcon;
  return b;
}

nn::Tensor distance_graph(nn::Graph& g, nn::Tensor a, nn::Tensor b,
                          const ContrastiveOptions& opts) {
  if (opts.normalize_embeddings) {
    a = normalize_graph(g, a);
    b = normalize_graph(g, b);
  }
  return g.l2_norm(g.sub(a, b));
}

nn::Tensor triplet_graph(nn::Graph& g, nn::Tensor d_p, nn::Tensor d_n,
                         double margin) {
  // Zero first so the tie at the kink selects it (subgradient 0 there).
  return g.maximum(g.scalar_constant(0.0),
                   g.add_scalar(g.sub(d_p, d_n), margin));
}

nn::Tensor giou_loss_graph(nn::Graph& g, nn::Tensor pred_cxcywh,
                           const geom::BoundingBox& gt) {
  if (pred_cxcywh.rows() != 1 || pred_cxcywh.cols() != 4) {
    throw std::invalid_argument("giou_loss_graph: box tensor must be 1x4");
  }
  nn::Tensor corners = g.matmul(
      pred_cxcywh, g.constant({4, 4}, {1.0, 0.0, 1.0, 0.0,   //
                                       0.0, 1.0, 0.0, 1.0,   //
                                       -0.5, 0.0, 0.5, 0.0,  //
                                       0.0, -0.5, 0.0, 0.5}));
  nn::Tensor ax1 = g.slice_cols(corners, 0, 1);
  nn::Tensor ay1 = g.slice_cols(corners, 1, 2);
  nn::Tensor ax2 = g.slice_cols(corners, 2, 3);
  nn::Tensor ay2 = g.slice_cols(corners, 3, 4);
  const geom::CornerBox gc = geom::to_corners(gt);
  nn::Tensor bx1 = g.scalar_constant(gc.x1);
  nn::Tensor by1 = g.scalar_constant(gc.y1);
  nn::Tensor bx2 = g.scalar_constant(gc.x2);
  nn::Tensor by2 = g.scalar_constant(gc.y2);
  nn::Tensor zero = g.scalar_constant(0.0);

  // Prediction first in every min/max so tie subgradients match the analytic
  // convention in geometry::giou_loss_gradient.
  nn::Tensor iw =
      g.maximum(zero, g.sub(g.minimum(ax2, bx2), g.maximum(ax1, bx1)));
  nn::Tensor ih =
      g.maximum(zero, g.sub(g.minimum(ay2, by2), g.maximum(ay1, by1)));
  nn::Tensor inter = g.mul(iw, ih);
  nn::Tensor area_a = g.mul(g.slice_cols(pred_cxcywh, 2, 3),
                            g.slice_cols(pred_cxcywh, 3, 4));
  nn::Tensor uni =
      g.sub(g.add(area_a, g.scalar_constant(gt.w * gt.h)), inter);
  nn::Tensor ew = g.sub(g.maximum(ax2, bx2), g.minimum(ax1, bx1));
  nn::Tensor eh = g.sub(g.maximum(ay2, by2), g.minimum(ay1, by1));
  nn::Tensor enc = g.mul(ew, eh);
  nn::Tensor giou = g.sub(g.div(inter, uni), g.div(g.sub(enc, uni), enc));
  return g.sub(g.scalar_constant(1.0), giou);
}

nn::Tensor box_loss_graph(nn::Graph& g, std::span<const nn::Tensor> pred_boxes,
                          std::span<const geom::BoundingBox> gt,
                          const LossWeights& w) {
  if (pred_boxes.size() != gt.size() || pred_boxes.empty()) {
    throw std::invalid_argument("box_loss_graph: length mismatch or empty");
  }
  w.validate();
  nn::Tensor total;
  for (std::size_t t = 0; t < pred_boxes.size(); ++t) {
    nn::Tensor gt_row =
        g.constant({1, 4}, {gt[t].cx, gt[t].cy, gt[t].w, gt[t].h});
    nn::Tensor l1 = g.sum(g.abs(g.sub(pred_boxes[t], gt_row)));
    nn::Tensor term =
        g.add(g.scale(l1, w.lambda_r),
              g.scale(giou_loss_graph(g, pred_boxes[t], gt[t]), w.lambda_g));
    total = t == 0 ? term : g.add(total, term);
  }
  return total;
}

nn::Tensor textcon_loss_graph(nn::Graph& g, std::span<const nn::Tensor> anchor,
                              std::span<const nn::Tensor> positive,
                              std::span<const nn::Tensor> negative,
                              const ContrastiveOptions& opts) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size() ||
      anchor.empty()) {
    throw std::invalid_argument("textcon_loss_graph: length mismatch or empty");
  }
  nn::Tensor total;
  for (std::size_t t = 0; t < anchor.size(); ++t) {
    nn::Tensor d_p = distance_graph(g, anchor[t], positive[t], opts);
    nn::Tensor d_n = distance_graph(g, anchor[t], negative[t], opts);
    nn::Tensor term = triplet_graph(g, d_p, d_n, opts.margin);
    total = t == 0 ? term : g.add(total, term);
  }
  return total;
}

nn::Tensor modalcon_loss_graph(nn::Graph& g, nn::Tensor video_feature,
                               nn::Tensor positive_sentence,
                               nn::Tensor negative_sentence,
                               const ContrastiveOptions& opts) {
  nn::Tensor d_p = distance_graph(g, video_feature, positive_sentence, opts);
  nn::Tensor d_n = distance_graph(g, video_feature, negative_sentence, opts);
  return triplet_graph(g, d_p, d_n, opts.margin);
}

nn::Tensor confidence_loss_graph(nn::Graph& g,
                                 std::span<const nn::Tensor> conf_logits,
                                 std::span<const int> positive_index) {
  if (conf_logits.size() != positive_index.size() || conf_logits.empty()) {
    throw std::invalid_argument(
        "confidence_loss_graph: length mismatch or empty");
  }
  nn::Tensor total;
  for (std::size_t t = 0; t < conf_logits.size(); ++t) {
    const int n = conf_logits[t].rows();
    if (positive_index[t] < 0 || positive_index[t] >= n) {
      throw std::invalid_argument("confidence_loss_graph: bad positive index");
    }
    std::vector<double> targets(n, 0.0);
    targets[positive_index[t]] = 1.0;
    nn::Tensor term =
        g.bce_with_logits_mean(conf_logits[t], std::move(targets));
    total = t == 0 ? term : g.add(total, term);
  }
  return total;
}

}  // namespace refprompt::loss
