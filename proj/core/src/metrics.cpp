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

#include "refprompt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace refprompt::metrics {

namespace {

constexpr double kPrecisionThresholds[] = {0.5, 0.6, 0.7, 0.8, 0.9};

constexpr const char* kStrictNote =
    "precision_at uses strict IoU > K; tools using >= may differ on exact "
    "threshold ties";

void check_same_shape(const Mask& a, const Mask& b, const char* op) {
  if (a.height != b.height || a.width != b.width) {
    throw std::invalid_argument(std::string(op) + ": mask shape mismatch");
  }
}

/// Marks every pixel within Euclidean distance r of an on-pixel.
Mask dilate(const Mask& mask, int r) {
  std::vector<std::pair<int, int>> disk;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dy * dy + dx * dx <= r * r) disk.emplace_back(dy, dx);
    }
  }
  Mask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.test(y, x)) continue;
      for (const auto& [dy, dx] : disk) {
        const int ny = y + dy;
        const int nx = x + dx;
        if (ny >= 0 && ny < mask.height && nx >= 0 && nx < mask.width) {
          out.set(ny, nx, true);
        }
      }
    }
  }
  return out;
}

IouCounts mask_counts(const Mask& pred, const Mask& gt) {
  IouCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool g = gt.data[i] != 0;
    c.intersection += p && g ? 1 : 0;
    c.union_count += p || g ? 1 : 0;
  }
  return c;
}

}  // namespace

double region_j(const Mask& pred, const Mask& gt) {
  check_same_shape(pred, gt, "region_j");
  const IouCounts c = mask_counts(pred, gt);
  if (c.union_count == 0) return 1.0;  // both empty
  return static_cast<double>(c.intersection) /
         static_cast<double>(c.union_count);
}

int boundary_tolerance(int height, int width) {
  return static_cast<int>(std::ceil(
      0.008 * std::sqrt(static_cast<double>(height) * height +
                        static_cast<double>(width) * width)));
}

Mask boundary_pixels(const Mask& mask) {
  Mask out(mask.height, mask.width);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.test(y, x)) continue;
      const bool border = y == 0 || y == mask.height - 1 || x == 0 ||
                          x == mask.width - 1;
      const bool exposed = border || !mask.test(y - 1, x) ||
                           !mask.test(y + 1, x) || !mask.test(y, x - 1) ||
                           !mask.test(y, x + 1);
      if (exposed) out.set(y, x, true);
    }
  }
  return out;
}

double boundary_f(const Mask& pred, const Mask& gt) {
  check_same_shape(pred, gt, "boundary_f");
  const bool pred_empty = pred.empty_mask();
  const bool gt_empty = gt.empty_mask();
  if (pred_empty && gt_empty) return 1.0;
  if (pred_empty || gt_empty) return 0.0;

  const Mask pb = boundary_pixels(pred);
  const Mask gb = boundary_pixels(gt);
  const int r = boundary_tolerance(pred.height, pred.width);
  const Mask gb_dilated = dilate(gb, r);
  const Mask pb_dilated = dilate(pb, r);

  std::uint64_t pb_total = 0, pb_matched = 0, gb_total = 0, gb_matched = 0;
  for (std::size_t i = 0; i < pb.data.size(); ++i) {
    if (pb.data[i]) {
      ++pb_total;
      if (gb_dilated.data[i]) ++pb_matched;
    }
    if (gb.data[i]) {
      ++gb_total;
      if (pb_dilated.data[i]) ++gb_matched;
    }
  }
  const double precision =
      pb_total == 0 ? 0.0 : static_cast<double>(pb_matched) / pb_total;
  const double recall =
      gb_total == 0 ? 0.0 : static_cast<double>(gb_matched) / gb_total;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double precision_at_k(std::span<const double> ious, double k) {
  if (ious.empty()) {
    throw std::invalid_argument("precision_at_k: empty IoU list");
  }
  std::uint64_t hits = 0;
  for (double v : ious) {
    if (v > k) ++hits;  // strictly greater
  }
  return static_cast<double>(hits) / static_cast<double>(ious.size());
}

std::pair<double, double> overall_and_mean_iou(
    std::span<const IouCounts> counts) {
  if (counts.empty()) {
    throw std::invalid_argument("overall_and_mean_iou: empty counts");
  }
  std::uint64_t total_i = 0, total_u = 0;
  double mean = 0.0;
  for (const IouCounts& c : counts) {
    total_i += c.intersection;
    total_u += c.union_count;
    mean += c.union_count == 0 ? 1.0
                               : static_cast<double>(c.intersection) /
                                     static_cast<double>(c.union_count);
  }
  const double overall =
      total_u == 0 ? 1.0
                   : static_cast<double>(total_i) / static_cast<double>(total_u);
  return {overall, mean / static_cast<double>(counts.size())};
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "davis_style") return Protocol::kDavisStyle;
  if (name == "a2d_style") return Protocol::kA2dStyle;
  throw std::invalid_argument("unknown protocol \"" + name +
                              "\"; expected davis_style or a2d_style");
}

std::string protocol_name(Protocol protocol) {
  return protocol == Protocol::kDavisStyle ? "davis_style" : "a2d_style";
}

MetricsReport evaluate_dataset(const data::Dataset& gt,
                               std::span<const PredictionSet> predictions,
                               Protocol protocol,
                               std::vector<FrameRecord>* per_frame) {
  auto key = [](const std::string& video, int expr) {
    return video + "/expr" + std::to_string(expr);
  };
  std::vector<const PredictionSet*> unclaimed;
  for (const auto& p : predictions) unclaimed.push_back(&p);

  MetricsReport report;
  report.protocol = protocol;
  report.protocol_note = kStrictNote;

  std::vector<double> frame_ious;
  std::vector<IouCounts> frame_counts;
  double j_sum = 0.0;
  double f_sum = 0.0;
  int n_expr = 0;

  for (const auto& video : gt.samples) {
    const int T = static_cast<int>(video.frames.size());
    for (std::size_t e = 0; e < video.expressions.size(); ++e) {
      const PredictionSet* pred = nullptr;
      for (const auto& p : predictions) {
        if (p.video_id == video.id &&
            p.expression_index == static_cast<int>(e)) {
          pred = &p;
          break;
        }
      }
      if (pred == nullptr) {
        throw std::runtime_error("missing prediction for " +
                                 key(video.id, static_cast<int>(e)));
      }
      unclaimed.erase(std::remove(unclaimed.begin(), unclaimed.end(), pred),
                      unclaimed.end());
      if (static_cast<int>(pred->masks.size()) != T) {
        throw std::runtime_error(
            "missing prediction for " + key(video.id, static_cast<int>(e)) +
            ": got " + std::to_string(pred->masks.size()) + " frames, need " +
            std::to_string(T));
      }
      const int object = video.expressions[e].object_index;
      double j_expr = 0.0;
      double f_expr = 0.0;
      for (int t = 0; t < T; ++t) {
        const Mask& gt_mask = video.gt_masks[t][object];
        const Mask& pd_mask = pred->masks[t];
        check_same_shape(pd_mask, gt_mask, "evaluate_dataset");
        const double j = region_j(pd_mask, gt_mask);
        const double f = boundary_f(pd_mask, gt_mask);
        j_expr += j;
        f_expr += f;
        frame_ious.push_back(j);
        frame_counts.push_back(mask_counts(pd_mask, gt_mask));
        if (per_frame != nullptr) {
          per_frame->push_back(
              {video.id, static_cast<int>(e), t, j, f});
        }
      }
      j_expr /= T;
      f_expr /= T;
      report.per_video.push_back(
          {video.id, static_cast<int>(e), j_expr, f_expr});
      j_sum += j_expr;
      f_sum += f_expr;
      ++n_expr;
    }
  }
  if (!unclaimed.empty()) {
    throw std::runtime_error(
        "prediction does not match any ground-truth key: " +
        key(unclaimed.front()->video_id, unclaimed.front()->expression_index));
  }
  if (n_expr == 0) {
    throw std::runtime_error("evaluate_dataset: empty ground truth");
  }

  report.j_mean = j_sum / n_expr;
  report.f_mean = f_sum / n_expr;
  report.jf_mean = (report.j_mean + report.f_mean) / 2.0;
  for (double k : kPrecisionThresholds) {
    report.precision_at.emplace_back(k, precision_at_k(frame_ious, k));
  }
  const auto [overall, mean] = overall_and_mean_iou(frame_counts);
  report.overall_iou = overall;
  report.mean_iou = mean;
  return report;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["protocol"] = protocol_name(report.protocol);
  j["protocol_note"] = report.protocol_note;
  j["j_mean"] = report.j_mean;
  j["f_mean"] = report.f_mean;
  j["jf_mean"] = report.jf_mean;
  nlohmann::json pk = nlohmann::json::object();
  for (const auto& [k, v] : report.precision_at) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%.1f", k);
    pk[buf] = v;
  }
  j["precision_at"] = std::move(pk);
  j["overall_iou"] = report.overall_iou;
  j["mean_iou"] = report.mean_iou;
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : report.per_video) {
    per.push_back({{"video", r.video_id},
                   {"expression", r.expression_index},
                   {"j", r.j_mean},
                   {"f", r.f_mean}});
  }
  j["per_video"] = std::move(per);
  return j.dump(2) + "\n";
}

void write_per_frame_csv(const std::filesystem::path& path,
                         std::span<const FrameRecord> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "video,expression,frame,j,f\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), ",%d,%d,%.17g,%.17g\n",
                  r.expression_index, r.frame, r.j, r.f);
    out << r.video_id << buf;
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<PredictionSet> load_predictions_dir(
    const std::filesystem::path& dir, const data::Dataset& gt) {
  std::vector<PredictionSet> out;
  for (const auto& video : gt.samples) {
    for (std::size_t e = 0; e < video.expressions.size(); ++e) {
      PredictionSet p;
      p.video_id = video.id;
      p.expression_index = static_cast<int>(e);
      for (std::size_t t = 0; t < video.frames.size(); ++t) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "expr%d/mask_%04d.pgm",
                      static_cast<int>(e), static_cast<int>(t));
        p.masks.push_back(read_pgm(dir / video.id / buf));
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

void write_predictions_dir(const std::filesystem::path& dir,
                           std::span<const PredictionSet> predictions) {
  for (const auto& p : predictions) {
    const std::filesystem::path expr_dir =
        dir / p.video_id / ("expr" + std::to_string(p.expression_index));
    std::error_code ec;
    std::filesystem::create_directories(expr_dir, ec);
    if (ec) {
      throw std::runtime_error("cannot create " + expr_dir.string() + ": " +
                               ec.message());
    }
    for (std::size_t t = 0; t < p.masks.size(); ++t) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "mask_%04d.pgm", static_cast<int>(t));
      write_pgm(expr_dir / buf, p.masks[t]);
    }
  }
}

}  // namespace refprompt::metrics
