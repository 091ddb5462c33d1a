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

#ifndef REFPROMPT_METRICS_HPP_
#define REFPROMPT_METRICS_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "refprompt/image.hpp"
#include "refprompt/synthdata.hpp"

namespace refprompt::metrics {

/// Region similarity J = |P intersect G| / |P union G|; both-empty masks
/// score 1.0. Throws std::invalid_argument on a shape mismatch.
double region_j(const Mask& pred, const Mask& gt);

/// Dilation radius for boundary matching: ceil(0.008 * image diagonal).
int boundary_tolerance(int height, int width);

/// One-pixel boundary: mask pixels with a 4-neighbor outside the mask or on
/// the image border. Exposed for the metric test oracles.
Mask boundary_pixels(const Mask& mask);

/// Contour accuracy F: boundary precision/recall with the dilation tolerance
/// above, F = 2PR/(P+R) (0 when P+R = 0); both-empty masks score 1.0.
double boundary_f(const Mask& pred, const Mask& gt);

/// Fraction of IoUs strictly greater than k. Throws on an empty list.
double precision_at_k(std::span<const double> ious, double k);

struct IouCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_count = 0;
};

/// (overall, mean): total-intersection / total-union, and the average of
/// per-sample IoUs where 0/0 samples count as 1.0.
std::pair<double, double> overall_and_mean_iou(std::span<const IouCounts> counts);

enum class Protocol { kDavisStyle, kA2dStyle };

Protocol protocol_from_name(const std::string& name);
std::string protocol_name(Protocol protocol);

struct ExpressionRecord {
  std::string video_id;
  int expression_index = 0;
  double j_mean = 0.0;  // averaged over the expression's frames
  double f_mean = 0.0;
};

struct FrameRecord {
  std::string video_id;
  int expression_index = 0;
  int frame = 0;
  double j = 0.0;
  double f = 0.0;
};

struct MetricsReport {
  Protocol protocol = Protocol::kDavisStyle;
  std::string protocol_note;
  double j_mean = 0.0;
  double f_mean = 0.0;
  double jf_mean = 0.0;  // always exactly (j_mean + f_mean) / 2
  std::vector<std::pair<double, double>> precision_at;  // (K, value), K ascending
  double overall_iou = 0.0;
  double mean_iou = 0.0;
  std::vector<ExpressionRecord> per_video;
};

/// One (video, expression) prediction track, one mask per annotated frame.
struct PredictionSet {
  std::string video_id;
  int expression_index = 0;
  std::vector<Mask> masks;
};

/// Evaluates predictions against every (video, expression, frame) of the
/// ground truth. Both metric families are always computed; `protocol`
/// selects the headline view and is recorded in the report. A missing or
/// misaligned prediction is a hard error naming the (video, expression,
/// frame) key. `per_frame`, when non-null, receives per-frame J/F rows.
MetricsReport evaluate_dataset(const data::Dataset& gt,
                               std::span<const PredictionSet> predictions,
                               Protocol protocol,
                               std::vector<FrameRecord>* per_frame = nullptr);

std::string report_to_json(const MetricsReport& report);

void write_per_frame_csv(const std::filesystem::path& path,
                         std::span<const FrameRecord> rows);

/// Loads a prediction directory laid out as
/// <dir>/<video_id>/expr<k>/mask_<frame>.pgm for every ground-truth key.
std::vector<PredictionSet> load_predictions_dir(
    const std::filesystem::path& dir, const data::Dataset& gt);

/// Writes predictions in the layout load_predictions_dir expects.
void write_predictions_dir(const std::filesystem::path& dir,
                           std::span<const PredictionSet> predictions);

}  // namespace refprompt::metrics

#endif  // REFPROMPT_METRICS_HPP_
