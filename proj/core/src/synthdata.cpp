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

#include "refprompt/synthdata.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "refprompt/rng.hpp"

namespace refprompt::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kMaxVideoAttempts = 200;
constexpr double kMinVisibleFraction = 0.35;
constexpr double kPlacementMargin = 0.03;
constexpr double kSmallHalfExtent = 0.07;
constexpr double kLargeHalfExtent = 0.12;
constexpr double kSpeedMin = 0.012;
constexpr double kSpeedMax = 0.028;
constexpr double kMaxPathSpan = 0.6;

struct Rgb {
  std::uint8_t r, g, b;
};

Rgb color_rgb(Color c) {
  switch (c) {
    case Color::kRed:
      return {220, 40, 40};
    case Color::kGreen:
      return {40, 200, 60};
    case Color::kBlue:
      return {50, 90, 230};
    case Color::kYellow:
      return {230, 220, 50};
  }
  throw std::logic_error("unreachable color");
}

constexpr Rgb kBackground{32, 32, 32};

void motion_direction(Motion m, double* dx, double* dy) {
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  switch (m) {
    case Motion::kLeft:
      *dx = -1.0;
      *dy = 0.0;
      return;
    case Motion::kRight:
      *dx = 1.0;
      *dy = 0.0;
      return;
    case Motion::kUp:
      *dx = 0.0;
      *dy = -1.0;
      return;
    case Motion::kDown:
      *dx = 0.0;
      *dy = 1.0;
      return;
    case Motion::kTowardTopRight:
      *dx = inv_sqrt2;
      *dy = -inv_sqrt2;
      return;
    case Motion::kTowardBottomLeft:
      *dx = -inv_sqrt2;
      *dy = inv_sqrt2;
      return;
    case Motion::kStill:
      *dx = 0.0;
      *dy = 0.0;
      return;
  }
  throw std::logic_error("unreachable motion");
}

/// Footprint (modal) mask of one object at frame t, ignoring occlusion.
Mask rasterize_object(const SceneObject& obj, int t, int height, int width) {
  Mask mask(height, width);
  double cx = 0.0;
  double cy = 0.0;
  obj.trajectory.position(t, &cx, &cy);
  const double cpx = cx * width;
  const double cpy = cy * height;
  const double r = obj.half_extent() * width;

  const int x0 = std::max(0, static_cast<int>(std::floor(cpx - r - 1.0)));
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(cpx + r + 1.0)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cpy - r - 1.0)));
  const int y1 =
      std::min(height - 1, static_cast<int>(std::ceil(cpy + r + 1.0)));

  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5;
      const double py = y + 0.5;
      bool inside = false;
      switch (obj.shape) {
        case Shape::kCircle: {
          const double ddx = px - cpx;
          const double ddy = py - cpy;
          inside = ddx * ddx + ddy * ddy <= r * r;
          break;
        }
        case Shape::kSquare:
          inside = std::abs(px - cpx) <= r && std::abs(py - cpy) <= r;
          break;
        case Shape::kTriangle: {
          // Vertices: apex on top, base at the bottom.
          const double ax = cpx, ay = cpy - r;
          const double bx = cpx - r, by = cpy + r;
          const double cx2 = cpx + r, cy2 = cpy + r;
          const double c1 = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
          const double c2 = (cx2 - bx) * (py - by) - (cy2 - by) * (px - bx);
          const double c3 = (ax - cx2) * (py - cy2) - (ay - cy2) * (px - cx2);
          inside = c1 <= 0.0 && c2 <= 0.0 && c3 <= 0.0;
          break;
        }
      }
      if (inside) mask.set(y, x, true);
    }
  }
  return mask;
}

geom::BoundingBox tight_box(const Mask& mask) {
  int min_x = mask.width, max_x = -1, min_y = mask.height, max_y = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.test(y, x)) continue;
      min_x = std::min(min_x, x);
      max_x = std::max(max_x, x);
      min_y = std::min(min_y, y);
      max_y = std::max(max_y, y);
    }
  }
  if (max_x < 0) throw std::logic_error("tight_box on empty mask");
  geom::CornerBox c;
  c.x1 = static_cast<double>(min_x) / mask.width;
  c.x2 = static_cast<double>(max_x + 1) / mask.width;
  c.y1 = static_cast<double>(min_y) / mask.height;
  c.y2 = static_cast<double>(max_y + 1) / mask.height;
  return geom::from_corners(c);
}

std::string expression_text(Color color, Shape shape, Motion motion) {
  std::string text = "the " + to_word(color) + " " + to_word(shape);
  if (motion == Motion::kStill) {
    text += " staying still";
  } else {
    text += " moving " + to_word(motion);
  }
  return text;
}

struct ObjectPlan {
  Shape shape;
  Color color;
  SizeClass size;
  Motion motion;
};

std::vector<ObjectPlan> sample_object_plans(const GenerationSpec& spec,
                                            Rng& rng) {
  std::vector<ObjectPlan> plans;
  std::vector<int> used_appearance;  // shape * 4 + color
  auto pick_appearance = [&] {
    while (true) {
      const int a = rng.uniform_int(12);
      if (std::find(used_appearance.begin(), used_appearance.end(), a) ==
          used_appearance.end()) {
        used_appearance.push_back(a);
        return a;
      }
    }
  };
  if (spec.motion_only_pairs) {
    for (int p = 0; p < spec.objects / 2; ++p) {
      const int a = pick_appearance();
      const SizeClass size =
          rng.uniform_int(2) == 0 ? SizeClass::kSmall : SizeClass::kLarge;
      const int m1 = rng.uniform_int(7);
      int m2 = rng.uniform_int(7);
      while (m2 == m1) m2 = rng.uniform_int(7);
      for (int m : {m1, m2}) {
        plans.push_back({static_cast<Shape>(a / 4), static_cast<Color>(a % 4),
                         size, static_cast<Motion>(m)});
      }
    }
  } else {
    for (int i = 0; i < spec.objects; ++i) {
      const int a = pick_appearance();
      plans.push_back({static_cast<Shape>(a / 4), static_cast<Color>(a % 4),
                       rng.uniform_int(2) == 0 ? SizeClass::kSmall
                                               : SizeClass::kLarge,
                       static_cast<Motion>(rng.uniform_int(7))});
    }
  }
  return plans;
}

Trajectory sample_trajectory(Motion motion, double half_extent, int frames,
                             Rng& rng) {
  double dx = 0.0;
  double dy = 0.0;
  motion_direction(motion, &dx, &dy);
  double speed = kSpeedMin + rng.uniform() * (kSpeedMax - kSpeedMin);
  if (motion == Motion::kStill) speed = 0.0;
  const double steps = static_cast<double>(frames - 1);
  if (steps > 0.0 && speed * steps > kMaxPathSpan) {
    speed = kMaxPathSpan / steps;
  }
  const double disp_x = dx * speed * steps;
  const double disp_y = dy * speed * steps;
  const double margin = half_extent + kPlacementMargin;

  auto sample_start = [&](double disp) {
    const double lo = margin - std::min(0.0, disp);
    const double hi = (1.0 - margin) - std::max(0.0, disp);
    if (hi <= lo) {
      throw std::runtime_error(
          "synthetic video generation: object path cannot fit in frame");
    }
    return lo + rng.uniform() * (hi - lo);
  };

  Trajectory tr;
  tr.cx0 = sample_start(disp_x);
  tr.cy0 = sample_start(disp_y);
  tr.vx = dx * speed;
  tr.vy = dy * speed;
  return tr;
}

/// Checks that the motion word can be read back from the visible-mask boxes;
/// occlusion may otherwise make a trajectory unreadable.
bool motion_readable(Motion motion, const geom::BoundingBox& first,
                     const geom::BoundingBox& last) {
  const double dcx = last.cx - first.cx;
  const double dcy = last.cy - first.cy;
  switch (motion) {
    case Motion::kRight:
      return dcx > 0.02 && std::abs(dcy) < 0.01;
    case Motion::kLeft:
      return dcx < -0.02 && std::abs(dcy) < 0.01;
    case Motion::kUp:
      return dcy < -0.02 && std::abs(dcx) < 0.01;
    case Motion::kDown:
      return dcy > 0.02 && std::abs(dcx) < 0.01;
    case Motion::kTowardTopRight:
      return dcx > 0.015 && dcy < -0.015;
    case Motion::kTowardBottomLeft:
      return dcx < -0.015 && dcy > 0.015;
    case Motion::kStill:
      return std::abs(dcx) < 0.01 && std::abs(dcy) < 0.01;
  }
  return false;
}

json box_to_json(const geom::BoundingBox& b) {
  return json::array({b.cx, b.cy, b.w, b.h});
}

geom::BoundingBox box_from_json(const json& j) {
  geom::BoundingBox b;
  b.cx = j.at(0).get<double>();
  b.cy = j.at(1).get<double>();
  b.w = j.at(2).get<double>();
  b.h = j.at(3).get<double>();
  return b;
}

std::string shape_name(Shape s) {
  switch (s) {
    case Shape::kCircle:
      return "circle";
    case Shape::kSquare:
      return "square";
    case Shape::kTriangle:
      return "triangle";
  }
  throw std::logic_error("unreachable shape");
}

Shape shape_from_name(const std::string& s) {
  if (s == "circle") return Shape::kCircle;
  if (s == "square") return Shape::kSquare;
  if (s == "triangle") return Shape::kTriangle;
  throw std::runtime_error("unknown shape name: " + s);
}

Color color_from_name(const std::string& s) {
  if (s == "red") return Color::kRed;
  if (s == "green") return Color::kGreen;
  if (s == "blue") return Color::kBlue;
  if (s == "yellow") return Color::kYellow;
  throw std::runtime_error("unknown color name: " + s);
}

std::string frame_file(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.ppm", t);
  return buf;
}

std::string mask_file(int t, int obj) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mask_%04d_obj%d.pgm", t, obj);
  return buf;
}

json video_entry(const VideoSample& v, const std::string& dir) {
  json e;
  e["id"] = v.id;
  e["dir"] = dir;
  e["T"] = static_cast<int>(v.frames.size());
  e["M"] = static_cast<int>(v.objects.size());
  e["height"] = v.height;
  e["width"] = v.width;
  json frames = json::array();
  for (std::size_t t = 0; t < v.frames.size(); ++t) {
    frames.push_back(frame_file(static_cast<int>(t)));
  }
  e["frames"] = std::move(frames);
  json objects = json::array();
  for (const auto& o : v.objects) {
    json jo;
    jo["shape"] = shape_name(o.shape);
    jo["color"] = to_word(o.color);
    jo["size"] = o.size_class == SizeClass::kSmall ? "small" : "large";
    jo["trajectory"] = {{"cx0", o.trajectory.cx0}, {"cy0", o.trajectory.cy0},
                        {"vx", o.trajectory.vx},   {"vy", o.trajectory.vy},
                        {"turn_frame", o.trajectory.turn_frame},
                        {"vx2", o.trajectory.vx2}, {"vy2", o.trajectory.vy2}};
    objects.push_back(std::move(jo));
  }
  e["objects"] = std::move(objects);
  json exprs = json::array();
  for (const auto& ex : v.expressions) {
    exprs.push_back({{"text", ex.text},
                     {"object_index", ex.object_index},
                     {"motion", to_word(ex.motion_word)}});
  }
  e["expressions"] = std::move(exprs);
  json boxes = json::array();
  json masks = json::array();
  for (std::size_t t = 0; t < v.frames.size(); ++t) {
    json row = json::array();
    json mrow = json::array();
    for (std::size_t m = 0; m < v.objects.size(); ++m) {
      row.push_back(box_to_json(v.gt_boxes[t][m]));
      mrow.push_back(mask_file(static_cast<int>(t), static_cast<int>(m)));
    }
    boxes.push_back(std::move(row));
    masks.push_back(std::move(mrow));
  }
  e["boxes"] = std::move(boxes);
  e["masks"] = std::move(masks);
  return e;
}

VideoSample video_from_entry(const json& e, const fs::path& base_dir) {
  VideoSample v;
  v.id = e.at("id").get<std::string>();
  v.height = e.at("height").get<int>();
  v.width = e.at("width").get<int>();
  const fs::path dir = base_dir / e.at("dir").get<std::string>();
  const int T = e.at("T").get<int>();
  const int M = e.at("M").get<int>();
  for (int t = 0; t < T; ++t) {
    v.frames.push_back(
        read_ppm(dir / e.at("frames").at(t).get<std::string>()));
  }
  for (const auto& jo : e.at("objects")) {
    SceneObject o;
    o.shape = shape_from_name(jo.at("shape").get<std::string>());
    o.color = color_from_name(jo.at("color").get<std::string>());
    o.size_class = jo.at("size").get<std::string>() == "small"
                       ? SizeClass::kSmall
                       : SizeClass::kLarge;
    const auto& jt = jo.at("trajectory");
    o.trajectory.cx0 = jt.at("cx0").get<double>();
    o.trajectory.cy0 = jt.at("cy0").get<double>();
    o.trajectory.vx = jt.at("vx").get<double>();
    o.trajectory.vy = jt.at("vy").get<double>();
    o.trajectory.turn_frame = jt.at("turn_frame").get<int>();
    o.trajectory.vx2 = jt.at("vx2").get<double>();
    o.trajectory.vy2 = jt.at("vy2").get<double>();
    v.objects.push_back(o);
  }
  for (const auto& je : e.at("expressions")) {
    Expression ex;
    ex.text = je.at("text").get<std::string>();
    ex.object_index = je.at("object_index").get<int>();
    ex.motion_word = motion_from_word(je.at("motion").get<std::string>());
    v.expressions.push_back(std::move(ex));
  }
  v.gt_boxes.resize(T);
  v.gt_masks.resize(T);
  for (int t = 0; t < T; ++t) {
    for (int m = 0; m < M; ++m) {
      v.gt_boxes[t].push_back(box_from_json(e.at("boxes").at(t).at(m)));
      v.gt_masks[t].push_back(
          read_pgm(dir / e.at("masks").at(t).at(m).get<std::string>()));
    }
  }
  return v;
}

json parse_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("cannot parse " + path.string() + ": " +
                             e.what());
  }
  return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

std::string to_word(Shape s) { return shape_name(s); }

std::string to_word(Color c) {
  switch (c) {
    case Color::kRed:
      return "red";
    case Color::kGreen:
      return "green";
    case Color::kBlue:
      return "blue";
    case Color::kYellow:
      return "yellow";
  }
  throw std::logic_error("unreachable color");
}

std::array<double, 3> color_rgb01(Color c) {
  const Rgb rgb = color_rgb(c);
  return {rgb.r / 255.0, rgb.g / 255.0, rgb.b / 255.0};
}

std::string to_word(Motion m) {
  switch (m) {
    case Motion::kLeft:
      return "left";
    case Motion::kRight:
      return "right";
    case Motion::kUp:
      return "up";
    case Motion::kDown:
      return "down";
    case Motion::kTowardTopRight:
      return "toward-top-right";
    case Motion::kTowardBottomLeft:
      return "toward-bottom-left";
    case Motion::kStill:
      return "still";
  }
  throw std::logic_error("unreachable motion");
}

Motion motion_from_word(const std::string& word) {
  for (int m = 0; m < 7; ++m) {
    if (to_word(static_cast<Motion>(m)) == word) return static_cast<Motion>(m);
  }
  throw std::runtime_error("unknown motion word: " + word);
}

void Trajectory::position(int t, double* cx, double* cy) const {
  if (turn_frame < 0 || t <= turn_frame) {
    *cx = cx0 + vx * t;
    *cy = cy0 + vy * t;
    return;
  }
  *cx = cx0 + vx * turn_frame + vx2 * (t - turn_frame);
  *cy = cy0 + vy * turn_frame + vy2 * (t - turn_frame);
}

double SceneObject::half_extent() const {
  return size_class == SizeClass::kSmall ? kSmallHalfExtent : kLargeHalfExtent;
}

bool operator==(const VideoSample& a, const VideoSample& b) {
  auto same_traj = [](const Trajectory& x, const Trajectory& y) {
    return x.cx0 == y.cx0 && x.cy0 == y.cy0 && x.vx == y.vx && x.vy == y.vy &&
           x.turn_frame == y.turn_frame && x.vx2 == y.vx2 && x.vy2 == y.vy2;
  };
  if (a.id != b.id || a.height != b.height || a.width != b.width ||
      a.frames.size() != b.frames.size() ||
      a.objects.size() != b.objects.size() ||
      a.expressions.size() != b.expressions.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.frames.size(); ++i) {
    if (!(a.frames[i] == b.frames[i])) return false;
  }
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    const auto& x = a.objects[i];
    const auto& y = b.objects[i];
    if (x.shape != y.shape || x.color != y.color ||
        x.size_class != y.size_class || !same_traj(x.trajectory, y.trajectory)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.expressions.size(); ++i) {
    const auto& x = a.expressions[i];
    const auto& y = b.expressions[i];
    if (x.text != y.text || x.object_index != y.object_index ||
        x.motion_word != y.motion_word) {
      return false;
    }
  }
  if (a.gt_boxes.size() != b.gt_boxes.size() ||
      a.gt_masks.size() != b.gt_masks.size()) {
    return false;
  }
  for (std::size_t t = 0; t < a.gt_boxes.size(); ++t) {
    if (a.gt_boxes[t].size() != b.gt_boxes[t].size()) return false;
    for (std::size_t m = 0; m < a.gt_boxes[t].size(); ++m) {
      const auto& x = a.gt_boxes[t][m];
      const auto& y = b.gt_boxes[t][m];
      if (x.cx != y.cx || x.cy != y.cy || x.w != y.w || x.h != y.h) {
        return false;
      }
    }
    if (a.gt_masks[t].size() != b.gt_masks[t].size()) return false;
    for (std::size_t m = 0; m < a.gt_masks[t].size(); ++m) {
      if (!(a.gt_masks[t][m] == b.gt_masks[t][m])) return false;
    }
  }
  return true;
}

VideoSample generate_video(const GenerationSpec& spec, std::uint64_t seed) {
  if (spec.frames < 4 || spec.frames > 32) {
    throw std::invalid_argument("generation spec: frames must be in [4, 32]");
  }
  if (spec.objects < 2 || spec.objects > 4) {
    throw std::invalid_argument("generation spec: objects must be in [2, 4]");
  }
  if (spec.height != spec.width ||
      (spec.height != 64 && spec.height != 128)) {
    throw std::invalid_argument(
        "generation spec: frames must be square with side 64 or 128");
  }
  if (spec.motion_only_pairs && spec.objects % 2 != 0) {
    throw std::invalid_argument(
        "generation spec: motion_only_pairs requires an even object count");
  }

  Rng rng(seed);
  const int T = spec.frames;
  const int M = spec.objects;

  for (int attempt = 0; attempt < kMaxVideoAttempts; ++attempt) {
    const auto plans = sample_object_plans(spec, rng);
    std::vector<SceneObject> objects;
    for (const auto& p : plans) {
      SceneObject o;
      o.shape = p.shape;
      o.color = p.color;
      o.size_class = p.size;
      o.trajectory = sample_trajectory(p.motion, p.size == SizeClass::kSmall
                                                     ? kSmallHalfExtent
                                                     : kLargeHalfExtent,
                                       T, rng);
      objects.push_back(o);
    }

    // Rasterize every frame; later object indices are drawn on top.
    std::vector<std::vector<Mask>> visible(T);
    bool feasible = true;
    for (int t = 0; t < T && feasible; ++t) {
      std::vector<Mask> modal;
      for (int m = 0; m < M; ++m) {
        modal.push_back(rasterize_object(objects[m], t, spec.height,
                                         spec.width));
      }
      for (int m = 0; m < M; ++m) {
        Mask vis = modal[m];
        for (int j = m + 1; j < M; ++j) {
          for (std::size_t i = 0; i < vis.data.size(); ++i) {
            if (modal[j].data[i]) vis.data[i] = 0;
          }
        }
        const long long vis_area = vis.area();
        const long long modal_area = modal[m].area();
        if (modal_area == 0 ||
            static_cast<double>(vis_area) <
                kMinVisibleFraction * static_cast<double>(modal_area)) {
          feasible = false;
          break;
        }
        visible[t].push_back(std::move(vis));
      }
    }
    if (!feasible) continue;

    std::vector<std::vector<geom::BoundingBox>> boxes(T);
    for (int t = 0; t < T; ++t) {
      for (int m = 0; m < M; ++m) boxes[t].push_back(tight_box(visible[t][m]));
    }
    bool readable = true;
    for (int m = 0; m < M && readable; ++m) {
      readable = motion_readable(plans[m].motion, boxes[0][m],
                                 boxes[T - 1][m]);
    }
    if (!readable) continue;

    VideoSample v;
    v.id = "sample_" + std::to_string(seed);
    v.height = spec.height;
    v.width = spec.width;
    v.objects = std::move(objects);
    for (int m = 0; m < M; ++m) {
      Expression ex;
      ex.object_index = m;
      ex.motion_word = plans[m].motion;
      ex.text = expression_text(plans[m].color, plans[m].shape,
                                plans[m].motion);
      v.expressions.push_back(std::move(ex));
    }
    for (int t = 0; t < T; ++t) {
      Image frame(spec.height, spec.width);
      for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
          frame.at(y, x, 0) = kBackground.r;
          frame.at(y, x, 1) = kBackground.g;
          frame.at(y, x, 2) = kBackground.b;
        }
      }
      for (int m = 0; m < M; ++m) {
        const Rgb rgb = color_rgb(v.objects[m].color);
        const Mask modal = rasterize_object(v.objects[m], t, spec.height,
                                            spec.width);
        for (int y = 0; y < spec.height; ++y) {
          for (int x = 0; x < spec.width; ++x) {
            if (!modal.test(y, x)) continue;
            frame.at(y, x, 0) = rgb.r;
            frame.at(y, x, 1) = rgb.g;
            frame.at(y, x, 2) = rgb.b;
          }
        }
      }
      v.frames.push_back(std::move(frame));
    }
    v.gt_boxes = std::move(boxes);
    v.gt_masks = std::move(visible);
    return v;
  }
  throw std::runtime_error(
      "synthetic video generation: no feasible layout after " +
      std::to_string(kMaxVideoAttempts) + " attempts");
}

Dataset generate_dataset_in_memory(const DatasetConfig& config) {
  if (config.n_videos < 1) {
    throw std::invalid_argument("dataset config: n_videos must be >= 1");
  }
  Dataset d;
  d.height = config.video.height;
  d.width = config.video.width;
  for (int i = 0; i < config.n_videos; ++i) {
    VideoSample v =
        generate_video(config.video, Rng::derive(config.seed, "video", i));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "video_%04d", i);
    v.id = buf;
    d.samples.push_back(std::move(v));
  }
  return d;
}

void generate_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  const Dataset d = generate_dataset_in_memory(config);
  std::error_code ec;
  fs::create_directories(out_dir / "videos", ec);
  if (ec) {
    throw std::runtime_error("cannot create " + (out_dir / "videos").string() +
                             ": " + ec.message());
  }
  json manifest;
  manifest["format"] = "refprompt-dataset";
  manifest["version"] = 1;
  manifest["height"] = d.height;
  manifest["width"] = d.width;
  json videos = json::array();
  for (const auto& v : d.samples) {
    const std::string rel_dir = "videos/" + v.id;
    const fs::path dir = out_dir / "videos" / v.id;
    fs::create_directories(dir, ec);
    if (ec) {
      throw std::runtime_error("cannot create " + dir.string() + ": " +
                               ec.message());
    }
    for (std::size_t t = 0; t < v.frames.size(); ++t) {
      write_ppm(dir / frame_file(static_cast<int>(t)), v.frames[t]);
      for (std::size_t m = 0; m < v.objects.size(); ++m) {
        write_pgm(dir / mask_file(static_cast<int>(t), static_cast<int>(m)),
                  v.gt_masks[t][m]);
      }
    }
    write_text_file(dir / "video.json", video_entry(v, ".").dump(2) + "\n");
    videos.push_back(video_entry(v, rel_dir));
  }
  manifest["videos"] = std::move(videos);
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& path) {
  const fs::path manifest_path =
      fs::is_directory(path) ? path / "manifest.json" : path;
  const json manifest = parse_json_file(manifest_path);
  if (manifest.value("format", "") != "refprompt-dataset") {
    throw std::runtime_error("not a dataset manifest: " +
                             manifest_path.string());
  }
  Dataset d;
  d.height = manifest.at("height").get<int>();
  d.width = manifest.at("width").get<int>();
  const fs::path base = manifest_path.parent_path();
  for (const auto& e : manifest.at("videos")) {
    d.samples.push_back(video_from_entry(e, base));
  }
  return d;
}

VideoSample load_video(const fs::path& path) {
  const fs::path json_path =
      fs::is_directory(path) ? path / "video.json" : path;
  const json e = parse_json_file(json_path);
  return video_from_entry(e, json_path.parent_path());
}

TrainView make_train_view(const VideoSample& sample, const Vocabulary& vocab) {
  TrainView view;
  view.frames = &sample.frames;
  view.gt_boxes = &sample.gt_boxes;
  for (const auto& ex : sample.expressions) {
    TrainExpression te;
    te.text = ex.text;
    te.token_ids = vocab.tokenize(ex.text);
    te.object_index = ex.object_index;
    view.expressions.push_back(std::move(te));
  }
  return view;
}

}  // namespace refprompt::data
