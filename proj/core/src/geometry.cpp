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

#include "refprompt/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace refprompt::geom {

namespace {

void check_field(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string("BoundingBox: non-finite ") + name);
  }
}

struct Overlap {
  double inter = 0.0;      // intersection area
  double uni = 0.0;        // union area
  double enclosing = 0.0;  // area of the minimal enclosing box
};

Overlap overlap(const BoundingBox& a, const BoundingBox& b) {
  const CornerBox ca = to_corners(a);
  const CornerBox cb = to_corners(b);
  const double iw =
      std::max(0.0, std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1));
  const double ih =
      std::max(0.0, std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1));
  Overlap o;
  o.inter = iw * ih;
  o.uni = ca.area() + cb.area() - o.inter;
  const double ew = std::max(ca.x2, cb.x2) - std::min(ca.x1, cb.x1);
  const double eh = std::max(ca.y2, cb.y2) - std::min(ca.y1, cb.y1);
  o.enclosing = ew * eh;
  return o;
}

}  // namespace

bool is_valid(const BoundingBox& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
         std::isfinite(b.h) && b.cx >= 0.0 && b.cx <= 1.0 && b.cy >= 0.0 &&
         b.cy <= 1.0 && b.w >= kMinExtent && b.w <= 1.0 &&
         b.h >= kMinExtent && b.h <= 1.0;
}

void validate(const BoundingBox& b) {
  check_field(b.cx, "cx");
  check_field(b.cy, "cy");
  check_field(b.w, "w");
  check_field(b.h, "h");
  if (b.cx < 0.0 || b.cx > 1.0) {
    throw std::invalid_argument("BoundingBox: cx outside [0,1]");
  }
  if (b.cy < 0.0 || b.cy > 1.0) {
    throw std::invalid_argument("BoundingBox: cy outside [0,1]");
  }
  if (b.w < kMinExtent || b.w > 1.0) {
    throw std::invalid_argument("BoundingBox: w outside [min extent, 1]");
  }
  if (b.h < kMinExtent || b.h > 1.0) {
    throw std::invalid_argument("BoundingBox: h outside [min extent, 1]");
  }
}

CornerBox to_corners(const BoundingBox& b) {
  check_field(b.cx, "cx");
  check_field(b.cy, "cy");
  check_field(b.w, "w");
  check_field(b.h, "h");
  return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0,
          b.cy + b.h / 2.0};
}

BoundingBox from_corners(const CornerBox& c) {
  return {(c.x1 + c.x2) / 2.0, (c.y1 + c.y2) / 2.0, c.x2 - c.x1, c.y2 - c.y1};
}

BoundingBox clamp_to_unit(const BoundingBox& b) {
  CornerBox c = to_corners(b);
  auto clamp_axis = [](double& lo, double& hi) {
    lo = std::clamp(lo, 0.0, 1.0);
    hi = std::clamp(hi, 0.0, 1.0);
    if (hi - lo < kMinExtent) {
      const double mid =
          std::clamp((lo + hi) / 2.0, kMinExtent / 2.0, 1.0 - kMinExtent / 2.0);
      lo = mid - kMinExtent / 2.0;
      hi = mid + kMinExtent / 2.0;
    }
  };
  clamp_axis(c.x1, c.x2);
  clamp_axis(c.y1, c.y2);
  BoundingBox out = from_corners(c);
  // (mid + e/2) - (mid - e/2) can round one ulp below e; force the
  // postcondition that a clamped box always passes validate().
  out.w = std::max(out.w, kMinExtent);
  out.h = std::max(out.h, kMinExtent);
  return out;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  validate(a);
  validate(b);
  const Overlap o = overlap(a, b);
  return o.inter / o.uni;
}

double generalized_iou(const BoundingBox& a, const BoundingBox& b) {
  validate(a);
  validate(b);
  const Overlap o = overlap(a, b);
  if (o.enclosing <= 0.0) {
    throw std::runtime_error("generalized_iou: degenerate enclosing area");
  }
  return o.inter / o.uni - (o.enclosing - o.uni) / o.enclosing;
}

double giou_loss(const BoundingBox& pred, const BoundingBox& gt) {
  return 1.0 - generalized_iou(pred, gt);
}

std::array<double, 4> giou_loss_gradient(const BoundingBox& pred,
                                         const BoundingBox& gt) {
  validate(pred);
  validate(gt);
  const CornerBox a = to_corners(pred);
  const CornerBox b = to_corners(gt);

  const double iw_raw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih_raw = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double iw = std::max(0.0, iw_raw);
  const double ih = std::max(0.0, ih_raw);
  const double inter = iw * ih;
  const double area_a = a.area();
  const double uni = area_a + b.area() - inter;
  const double ew = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double eh = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double enc = ew * eh;

  // loss = 2 - inter/uni - uni/enc with uni = area_a + area_b - inter.
  const double d_inter = -1.0 / uni - inter / (uni * uni) + 1.0 / enc;
  const double d_area = inter / (uni * uni) - 1.0 / enc;
  const double d_enc = uni / (enc * enc);

  // Branch indicators; ties take the first (pred) argument like the forward.
  const double di_ax1 = (iw_raw > 0.0 && a.x1 >= b.x1) ? -ih : 0.0;
  const double di_ax2 = (iw_raw > 0.0 && a.x2 <= b.x2) ? ih : 0.0;
  const double di_ay1 = (ih_raw > 0.0 && a.y1 >= b.y1) ? -iw : 0.0;
  const double di_ay2 = (ih_raw > 0.0 && a.y2 <= b.y2) ? iw : 0.0;

  const double dc_ax1 = (a.x1 <= b.x1) ? -eh : 0.0;
  const double dc_ax2 = (a.x2 >= b.x2) ? eh : 0.0;
  const double dc_ay1 = (a.y1 <= b.y1) ? -ew : 0.0;
  const double dc_ay2 = (a.y2 >= b.y2) ? ew : 0.0;

  const double g_ax1 = d_inter * di_ax1 + d_enc * dc_ax1;
  const double g_ax2 = d_inter * di_ax2 + d_enc * dc_ax2;
  const double g_ay1 = d_inter * di_ay1 + d_enc * dc_ay1;
  const double g_ay2 = d_inter * di_ay2 + d_enc * dc_ay2;

  return {
      g_ax1 + g_ax2,
      g_ay1 + g_ay2,
      0.5 * (g_ax2 - g_ax1) + d_area * pred.h,
      0.5 * (g_ay2 - g_ay1) + d_area * pred.w,
  };
}

}  // namespace refprompt::geom
