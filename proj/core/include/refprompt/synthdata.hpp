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

#ifndef REFPROMPT_SYNTHDATA_HPP_
#define REFPROMPT_SYNTHDATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "refprompt/geometry.hpp"
#include "refprompt/image.hpp"
#include "refprompt/vocab.hpp"

namespace refprompt::data {

enum class Shape { kCircle, kSquare, kTriangle };
enum class Color { kRed, kGreen, kBlue, kYellow };
enum class SizeClass { kSmall, kLarge };
enum class Motion {
  kLeft,
  kRight,
  kUp,
  kDown,
  kTowardTopRight,
  kTowardBottomLeft,
  kStill
};

std::string to_word(Shape s);
std::string to_word(Color c);
std::string to_word(Motion m);

/// Palette value of a color with channels scaled to [0, 1].
std::array<double, 3> color_rgb01(Color c);
Motion motion_from_word(const std::string& word);

/// Constant-velocity path in normalized coordinates with an optional turn.
/// position(t) integrates frame-by-frame so a turn changes direction exactly
/// at turn_frame.
struct Trajectory {
  double cx0 = 0.5;
  double cy0 = 0.5;
  double vx = 0.0;  // per-frame displacement, fraction of width
  double vy = 0.0;
  int turn_frame = -1;  // -1: straight path
  double vx2 = 0.0;
  double vy2 = 0.0;

  void position(int t, double* cx, double* cy) const;
};

struct SceneObject {
  Shape shape = Shape::kCircle;
  Color color = Color::kRed;
  SizeClass size_class = SizeClass::kSmall;
  Trajectory trajectory;

  /// Half extent of the footprint in normalized units.
  double half_extent() const;
};

struct Expression {
  std::string text;
  int object_index = 0;
  Motion motion_word = Motion::kStill;
};

struct VideoSample {
  std::string id;
  int height = 0;
  int width = 0;
  std::vector<Image> frames;                              // T
  std::vector<SceneObject> objects;                       // M
  std::vector<Expression> expressions;                    // M, one per object
  std::vector<std::vector<geom::BoundingBox>> gt_boxes;   // T x M
  std::vector<std::vector<Mask>> gt_masks;                // T x M (visible)
};

bool operator==(const VideoSample& a, const VideoSample& b);

struct GenerationSpec {
  int frames = 8;       // T in [4, 32] (T >= 2 accepted for tests)
  int objects = 2;      // M in [2, 4]
  int height = 64;      // H = W in {64, 128}
  int width = 64;
  /// When set, objects come in pairs sharing (shape, color, size) and
  /// differing only in motion word, so their expressions are distinguishable
  /// by the motion word alone. Requires an even object count. When unset,
  /// every object has a unique (shape, color) pair.
  bool motion_only_pairs = false;
};

/// Deterministic generation: identical output bytes for identical
/// (spec, seed). Throws std::runtime_error if no feasible layout is found
/// within a bounded number of attempts.
VideoSample generate_video(const GenerationSpec& spec, std::uint64_t seed);

struct DatasetConfig {
  GenerationSpec video;
  int n_videos = 4;
  std::uint64_t seed = 0;
};

struct Dataset {
  int height = 0;
  int width = 0;
  std::vector<VideoSample> samples;
};

/// Writes manifest.json plus per-video directories (frames as binary PPM,
/// per-object visible masks as binary PGM, and a self-contained video.json).
void generate_dataset(const DatasetConfig& config,
                      const std::filesystem::path& out_dir);

Dataset generate_dataset_in_memory(const DatasetConfig& config);

/// Loads a dataset previously written by generate_dataset. `path` may be the
/// manifest file or the directory containing manifest.json.
Dataset load_dataset(const std::filesystem::path& path);

/// Loads one video from its video.json (or the directory containing it).
VideoSample load_video(const std::filesystem::path& path);

/// What the trainer is allowed to see: frames, text, boxes. This type has no
/// mask member by design; the training loop accepts only TrainView, which
/// keeps ground-truth masks out of every loss code path.
struct TrainExpression {
  std::string text;
  std::vector<int> token_ids;
  int object_index = 0;
};

struct TrainView {
  const std::vector<Image>* frames = nullptr;
  std::vector<TrainExpression> expressions;
  const std::vector<std::vector<geom::BoundingBox>>* gt_boxes = nullptr;  // T x M
};

TrainView make_train_view(const VideoSample& sample, const Vocabulary& vocab);

}  // namespace refprompt::data

#endif  // REFPROMPT_SYNTHDATA_HPP_
