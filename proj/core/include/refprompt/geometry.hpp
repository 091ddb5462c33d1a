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

#ifndef REFPROMPT_GEOMETRY_HPP
#define REFPROMPT_GEOMETRY_HPP

#include <array>

namespace refprompt::geom {

/// Minimum box extent accepted by validation; smaller widths/heights are an
/// error so that union and enclosing areas stay strictly positive.
inline constexpr double kMinExtent = 1e-6;

/// Normalized center-size box. cx/cy are fractions of image width/height in
/// [0,1]; w/h are fractions in (0,1]. The corner view may extend outside the
/// unit square (e.g. cx=0.1, w=0.5); clamp_to_unit produces the version used
/// for prompting and evaluation.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BoundingBox&) const = default;
};

struct CornerBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool operator==(const CornerBox&) const = default;
};

bool is_valid(const BoundingBox& b);

/// Throws std::invalid_argument with the offending field when b is not a
/// valid normalized box (finite, centers in [0,1], extents in [kMinExtent, 1]).
void validate(const BoundingBox& b);

CornerBox to_corners(const BoundingBox& b);
BoundingBox from_corners(const CornerBox& c);

/// Clamps the corner view into the unit square and re-centers, preserving a
/// minimum extent of kMinExtent. Used before prompting and evaluation only;
/// losses consume raw boxes so gradients survive at the image border.
BoundingBox clamp_to_unit(const BoundingBox& b);

/// Intersection over union in [0, 1]. Symmetric; 1 iff equal point sets.
double iou(const BoundingBox& a, const BoundingBox& b);

/// GIoU = IoU - (area(enclosing) - area(union)) / area(enclosing), in (-1, 1].
/// Equals IoU whenever one box contains the other.
double generalized_iou(const BoundingBox& a, const BoundingBox& b);

/// 1 - GIoU, in [0, 2). Zero iff the boxes are identical.
double giou_loss(const BoundingBox& pred, const BoundingBox& gt);

/// Analytic gradient of giou_loss with respect to (pred.cx, pred.cy, pred.w,
/// pred.h). Piecewise derivative; at min/max ties the first-argument branch
/// is taken, matching the forward evaluation order.
std::array<double, 4> giou_loss_gradient(const BoundingBox& pred,
                                         const BoundingBox& gt);

}  // namespace refprompt::geom

#endif  // REFPROMPT_GEOMETRY_HPP
