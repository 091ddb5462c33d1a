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

#ifndef REFPROMPT_PIPELINE_HPP_
#define REFPROMPT_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "refprompt/checkpoint.hpp"
#include "refprompt/config.hpp"
#include "refprompt/losses.hpp"
#include "refprompt/metrics.hpp"
#include "refprompt/model.hpp"
#include "refprompt/segmenter.hpp"
#include "refprompt/synthdata.hpp"

namespace refprompt::pipe {

/// One parameter store holding both halves of the system: the trainable
/// proposal network (plus its frozen text table) and the fully frozen
/// segmenter stack. Heap members keep internal pointers stable under moves.
struct BuiltModel {
  cfg::RunConfig run_config;
  model::ModelConfig model_config;
  seg::SegmenterConfig seg_config;
  std::unique_ptr<nn::ParameterStore> store;
  std::unique_ptr<model::ProposalModel> proposal;
  std::unique_ptr<seg::FrozenSegmenterStack> frozen;
};

/// Builds and seeds the full system from a validated config.
BuiltModel build_model(const cfg::RunConfig& cfg);

/// Rebuilds the system from the canonical config embedded in a checkpoint,
/// then loads the parameter values bit-exactly.
BuiltModel load_model(const std::filesystem::path& checkpoint_path);

// ---- Optimizers -------------------------------------------------------

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  /// One update on the trainable partition from accumulated gradients.
  virtual void step(nn::ParameterStore& store) = 0;
  /// Effective learning rate for the next step (warmup schedules use this).
  virtual void set_lr(double lr) = 0;
  /// Internal state as named arrays for train-state archives.
  virtual std::vector<ckpt::NamedArray> state_arrays(
      const nn::ParameterStore& store) const = 0;
  virtual void load_state_arrays(const nn::ParameterStore& store,
                                 std::span<const ckpt::NamedArray> arrays) = 0;
};

/// "sgd_momentum" (the reference) or "adam"; throws on other names.
std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr,
                                          double momentum);

// ---- Training ---------------------------------------------------------

struct TrainResult {
  std::filesystem::path checkpoint_path;  // parameters only
  std::filesystem::path state_path;       // parameters + optimizer state
  std::filesystem::path log_path;         // deterministic JSONL loss log
  std::int64_t steps = 0;
  std::vector<loss::LossBreakdown> history;  // one entry per step
};

/// Runs the training loop on the dataset at cfg.data_dir and writes
/// checkpoint.bin, train_state.bin, and loss_log.jsonl under out_dir.
///
/// Every random draw is a pure function of (cfg.seed, epoch, step), so a run
/// resumed from `resume_state` matches an uninterrupted run step-for-step
/// and bit-for-bit. The loss log holds only deterministic fields; wall-clock
/// progress goes to `progress` (pass nullptr to silence it).
TrainResult train(const cfg::RunConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::filesystem::path& resume_state = {},
                  std::ostream* progress = nullptr);

// ---- Online inference -------------------------------------------------

struct InferenceFrame {
  geom::BoundingBox box;  // clamped selected proposal, as prompted
  double confidence = 0.0;
  Mask mask;  // adapter output binarized at 0.5
};

/// Online: frame t is processed using only frames[t] and the sentence, in
/// order, with no state carried across frames. `max_frames` < 0 means all.
/// Adapter failures are rethrown as std::runtime_error naming the adapter
/// and the frame index.
std::vector<InferenceFrame> infer(const BuiltModel& built,
                                  const std::vector<Image>& frames,
                                  const std::string& sentence,
                                  const seg::SegmentAdapter& adapter,
                                  int max_frames = -1);

// ---- Evaluation -------------------------------------------------------

struct EvalOptions {
  metrics::Protocol protocol = metrics::Protocol::kDavisStyle;
  std::string adapter = "oracle";
  /// Upper-bound mode: ground-truth boxes replace the model's proposals.
  bool use_gt_boxes = false;
};

struct EvalResult {
  metrics::MetricsReport report;
  /// Mean IoU of prompted boxes vs ground-truth boxes over every
  /// (video, expression, frame), as a fraction in [0, 1].
  double box_iou_mean = 0.0;
  std::vector<metrics::FrameRecord> per_frame;
};

EvalResult evaluate(const BuiltModel& built, const data::Dataset& dataset,
                    const EvalOptions& opts);

/// Evaluation report plus the box-IoU column as JSON text.
std::string eval_result_to_json(const EvalResult& result);

// ---- Ablation harness -------------------------------------------------

struct AblationRow {
  std::string label;   // baseline | box_only | box_plus_contra | upper_bound
  double box = 0.0;    // mean box IoU on a 0-100 scale
  double jf = 0.0;
  double j = 0.0;
  double f = 0.0;
};

/// Four rows in fixed order: the untrained grounding baseline, the box-only
/// arm, the box-plus-contrastive arm, and the ground-truth-box upper bound.
/// Trains the two middle arms under out_dir and writes ablation.{json,txt}.
std::vector<AblationRow> ablate(const cfg::RunConfig& cfg,
                                const std::filesystem::path& out_dir,
                                std::ostream* progress = nullptr);

std::string ablation_table(std::span<const AblationRow> rows);

std::string ablation_to_json(std::span<const AblationRow> rows);

}  // namespace refprompt::pipe

#endif  // REFPROMPT_PIPELINE_HPP_
