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

#include "refprompt/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "json.hpp"

#include "refprompt/geometry.hpp"
#include "refprompt/rng.hpp"
#include "refprompt/vocab.hpp"

namespace refprompt::pipe {
namespace {

model::ModelConfig model_config_from(const cfg::RunConfig& cfg) {
  model::ModelConfig mc;
  mc.height = cfg.data_size;
  mc.width = cfg.data_size;
  mc.dim = cfg.model_dim;
  mc.patch = cfg.model_patch;
  mc.n_queries = cfg.model_queries;
  mc.heads = cfg.model_heads;
  mc.layers = cfg.model_layers;
  mc.l_max = cfg.model_l_max;
  mc.ffn_hidden = cfg.model_ffn_hidden;
  const data::Vocabulary vocab;
  mc.vocab_size = vocab.size();
  mc.zero_init_residual = cfg.model_zero_init_residual;
  // Cue directions are palette colors centered on the palette mean, then
  // normalized. Raw color vectors share a large brightness component (a
  // "red" direction scores bright yellow pixels above dim red ones); the
  // centered directions keep only what distinguishes the colors.
  constexpr std::array<data::Color, 4> palette = {
      data::Color::kRed, data::Color::kGreen, data::Color::kBlue,
      data::Color::kYellow};
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  for (data::Color color : palette) {
    const auto rgb = data::color_rgb01(color);
    for (int c = 0; c < 3; ++c) mean[c] += rgb[c] / palette.size();
  }
  for (data::Color color : palette) {
    auto dir = data::color_rgb01(color);
    double norm = 0.0;
    for (int c = 0; c < 3; ++c) {
      dir[c] -= mean[c];
      norm += dir[c] * dir[c];
    }
    norm = std::sqrt(norm);
    for (int c = 0; c < 3; ++c) dir[c] /= norm;
    mc.appearance_cues.push_back(
        model::AppearanceCue{vocab.id(data::to_word(color)), dir});
  }
  return mc;
}

seg::SegmenterConfig seg_config_from(const cfg::RunConfig& cfg) {
  seg::SegmenterConfig sc;
  sc.height = cfg.data_size;
  sc.width = cfg.data_size;
  sc.patch = cfg.model_patch;
  sc.prompt_dim = cfg.model_prompt_dim;
  sc.fourier_freqs = cfg.model_fourier_freqs;
  sc.text_dim = cfg.model_dim;
  return sc;
}

geom::BoundingBox box_from_tensor(const nn::Tensor& t) {
  return geom::BoundingBox{t.value(0, 0), t.value(0, 1), t.value(0, 2),
                           t.value(0, 3)};
}

class SgdMomentum final : public Optimizer {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  std::string name() const override { return "sgd_momentum"; }

  void set_lr(double lr) override { lr_ = lr; }

  void step(nn::ParameterStore& store) override {
    for (nn::Parameter* p : store.trainable()) {
      std::vector<double>& vel = velocity_[p->name];
      vel.resize(p->value.size(), 0.0);
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        vel[k] = momentum_ * vel[k] + p->grad[k];
        p->value[k] -= lr_ * vel[k];
      }
    }
  }

  std::vector<ckpt::NamedArray> state_arrays(
      const nn::ParameterStore& store) const override {
    std::vector<ckpt::NamedArray> out;
    for (const nn::Parameter* p : store.all()) {
      if (!p->trainable) continue;
      const auto it = velocity_.find(p->name);
      std::vector<double> values =
          it != velocity_.end() ? it->second
                                : std::vector<double>(p->value.size(), 0.0);
      out.push_back(ckpt::NamedArray{"opt.vel." + p->name, p->shape,
                                     std::move(values)});
    }
    return out;
  }

  void load_state_arrays(const nn::ParameterStore& store,
                         std::span<const ckpt::NamedArray> arrays) override {
    velocity_.clear();
    for (const ckpt::NamedArray& arr : arrays) {
      if (!arr.name.starts_with("opt.vel.")) continue;
      const std::string pname = arr.name.substr(8);
      if (!store.contains(pname)) {
        throw std::runtime_error("optimizer state for unknown parameter: " +
                                 pname);
      }
      velocity_[pname] = arr.values;
    }
  }

 private:
  double lr_;
  double momentum_;
  std::map<std::string, std::vector<double>> velocity_;
};

class Adam final : public Optimizer {
 public:
  Adam(double lr, double beta1) : lr_(lr), beta1_(beta1) {}

  std::string name() const override { return "adam"; }

  void set_lr(double lr) override { lr_ = lr; }

  void step(nn::ParameterStore& store) override {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (nn::Parameter* p : store.trainable()) {
      std::vector<double>& m = m_[p->name];
      std::vector<double>& v = v_[p->name];
      m.resize(p->value.size(), 0.0);
      v.resize(p->value.size(), 0.0);
      for (std::size_t k = 0; k < p->value.size(); ++k) {
        const double gk = p->grad[k];
        m[k] = beta1_ * m[k] + (1.0 - beta1_) * gk;
        v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * gk * gk;
        const double mhat = m[k] / c1;
        const double vhat = v[k] / c2;
        p->value[k] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
      }
    }
  }

  std::vector<ckpt::NamedArray> state_arrays(
      const nn::ParameterStore& store) const override {
    std::vector<ckpt::NamedArray> out;
    out.push_back(ckpt::NamedArray{
        "opt.adam.t", nn::TensorShape{1, 1},
        std::vector<double>{static_cast<double>(t_)}});
    for (const nn::Parameter* p : store.all()) {
      if (!p->trainable) continue;
      auto grab = [&](const std::map<std::string, std::vector<double>>& src) {
        const auto it = src.find(p->name);
        return it != src.end() ? it->second
                               : std::vector<double>(p->value.size(), 0.0);
      };
      out.push_back(
          ckpt::NamedArray{"opt.adam.m." + p->name, p->shape, grab(m_)});
      out.push_back(
          ckpt::NamedArray{"opt.adam.v." + p->name, p->shape, grab(v_)});
    }
    return out;
  }

  void load_state_arrays(const nn::ParameterStore& store,
                         std::span<const ckpt::NamedArray> arrays) override {
    m_.clear();
    v_.clear();
    t_ = 0;
    for (const ckpt::NamedArray& arr : arrays) {
      if (arr.name == "opt.adam.t") {
        t_ = static_cast<std::int64_t>(arr.values.at(0));
      } else if (arr.name.starts_with("opt.adam.m.")) {
        check_known(store, arr.name.substr(11));
        m_[arr.name.substr(11)] = arr.values;
      } else if (arr.name.starts_with("opt.adam.v.")) {
        check_known(store, arr.name.substr(11));
        v_[arr.name.substr(11)] = arr.values;
      }
    }
  }

 private:
  static void check_known(const nn::ParameterStore& store,
                          const std::string& name) {
    if (!store.contains(name)) {
      throw std::runtime_error("optimizer state for unknown parameter: " +
                               name);
    }
  }

  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  double lr_;
  double beta1_;
  std::int64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_;
  std::map<std::string, std::vector<double>> v_;
};

/// Per-video training context: the mask-free view plus pre-computed frozen
/// text encodings for every expression.
struct VideoContext {
  std::string id;
  data::TrainView view;
  std::vector<model::TextEncoding> texts;
};

struct StepDraw {
  int window_start = 0;
  int negative = 0;
};

/// Window start and negative-expression draws are a pure function of
/// (seed, step), so resumed runs replay the identical schedule and the
/// schedule is shared across ablation arms of the same seed.
StepDraw draw_for_step(std::uint64_t seed, std::int64_t step, int frames,
                       int window, int n_expressions, int anchor) {
  Rng rng(Rng::derive(seed, "step", static_cast<std::uint64_t>(step)));
  StepDraw draw;
  draw.window_start =
      frames > window ? rng.uniform_int(frames - window + 1) : 0;
  draw.negative = anchor;
  if (n_expressions > 1) {
    const int offset = rng.uniform_int(n_expressions - 1);
    draw.negative = offset < anchor ? offset : offset + 1;
  }
  return draw;
}

/// Scales all trainable gradients so their global L2 norm is at most
/// `max_norm` (no-op when max_norm <= 0).
void clip_gradients(nn::ParameterStore& store, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const nn::Parameter* p : store.trainable()) {
    for (double gk : p->grad) sq += gk * gk;
  }
  const double norm = std::sqrt(sq);
  if (norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (nn::Parameter* p : store.trainable()) {
    for (double& gk : p->grad) gk *= factor;
  }
}

std::vector<int> epoch_order(std::uint64_t seed, std::int64_t epoch,
                             std::size_t n) {
  std::vector<int> order(n);
  for (std::size_t k = 0; k < n; ++k) order[k] = static_cast<int>(k);
  Rng rng(Rng::derive(seed, "order", static_cast<std::uint64_t>(epoch)));
  for (std::size_t k = n; k > 1; --k) {
    const int pick = rng.uniform_int(static_cast<int>(k));
    std::swap(order[k - 1], order[static_cast<std::size_t>(pick)]);
  }
  return order;
}

/// Two configs describe the same run when everything except the stop point
/// (epochs / max_steps) matches; resuming with a later stop point is the
/// point of resuming.
std::string run_identity(const cfg::RunConfig& cfg) {
  cfg::RunConfig id = cfg;
  id.epochs = 0;
  id.max_steps = 0;
  return cfg::config_hash(id);
}

ckpt::CheckpointMeta make_meta(const cfg::RunConfig& cfg, int epoch,
                               std::int64_t step,
                               std::vector<double> loss_history) {
  ckpt::CheckpointMeta meta;
  meta.config_hash = cfg::config_hash(cfg);
  meta.config_text = cfg::canonical_text(cfg);
  meta.optimizer = cfg.optimizer;
  meta.seed = cfg.seed;
  meta.epoch = epoch;
  meta.step = step;
  meta.loss_history = std::move(loss_history);
  return meta;
}

}  // namespace

BuiltModel build_model(const cfg::RunConfig& cfg) {
  cfg.validate();
  BuiltModel built;
  built.run_config = cfg;
  built.model_config = model_config_from(cfg);
  built.seg_config = seg_config_from(cfg);
  built.model_config.validate();
  built.seg_config.validate();
  built.store = std::make_unique<nn::ParameterStore>();
  built.proposal = std::make_unique<model::ProposalModel>(
      built.model_config, *built.store, cfg.seed);
  built.frozen = std::make_unique<seg::FrozenSegmenterStack>(
      built.seg_config, *built.store, cfg.seed);
  return built;
}

BuiltModel load_model(const std::filesystem::path& checkpoint_path) {
  const ckpt::CheckpointMeta meta = ckpt::read_meta(checkpoint_path);
  BuiltModel built = build_model(cfg::parse_config(meta.config_text));
  ckpt::load_checkpoint(checkpoint_path, *built.store);
  return built;
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double lr,
                                          double momentum) {
  if (name == "sgd_momentum") {
    return std::make_unique<SgdMomentum>(lr, momentum);
  }
  if (name == "adam") {
    return std::make_unique<Adam>(lr, momentum);
  }
  throw std::invalid_argument(
      "unknown optimizer: " + name + " (expected sgd_momentum or adam)");
}

TrainResult train(const cfg::RunConfig& cfg,
                  const std::filesystem::path& out_dir,
                  const std::filesystem::path& resume_state,
                  std::ostream* progress) {
  cfg.validate();
  if (cfg.data_dir.empty()) {
    throw std::invalid_argument("train: data.dir must point at a dataset");
  }
  const data::Dataset dataset = data::load_dataset(cfg.data_dir);
  if (dataset.height != cfg.data_size || dataset.width != cfg.data_size) {
    throw std::invalid_argument(
        "dataset frame size does not match data.size: dataset is " +
        std::to_string(dataset.height) + "x" + std::to_string(dataset.width));
  }
  if (cfg.arm == cfg::Arm::kBoxPlusContra) {
    for (const data::VideoSample& sample : dataset.samples) {
      if (sample.expressions.size() < 2) {
        throw std::invalid_argument(
            "contrastive arm requires >= 2 expressions per video; video " +
            sample.id + " has " +
            std::to_string(sample.expressions.size()));
      }
    }
  }

  BuiltModel built = build_model(cfg);

  const data::Vocabulary vocab;
  std::vector<VideoContext> contexts;
  std::vector<std::pair<int, int>> pairs;  // (video index, expression index)
  contexts.reserve(dataset.samples.size());
  for (std::size_t v = 0; v < dataset.samples.size(); ++v) {
    const data::VideoSample& sample = dataset.samples[v];
    VideoContext ctx;
    ctx.id = sample.id;
    ctx.view = data::make_train_view(sample, vocab);
    for (std::size_t i = 0; i < ctx.view.expressions.size(); ++i) {
      ctx.texts.push_back(
          built.proposal->encode_text(ctx.view.expressions[i].token_ids));
      pairs.emplace_back(static_cast<int>(v), static_cast<int>(i));
    }
    contexts.push_back(std::move(ctx));
  }
  if (pairs.empty()) {
    throw std::invalid_argument("dataset has no (video, expression) pairs");
  }

  std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.checkpoint_path = out_dir / "checkpoint.bin";
  result.state_path = out_dir / "train_state.bin";
  result.log_path = out_dir / "loss_log.jsonl";

  std::unique_ptr<Optimizer> optimizer =
      make_optimizer(cfg.optimizer, cfg.lr, cfg.momentum);

  std::int64_t start_step = 0;
  std::vector<double> loss_history;
  if (!resume_state.empty()) {
    const ckpt::Archive archive = ckpt::read_archive(resume_state);
    if (run_identity(cfg::parse_config(archive.meta.config_text)) !=
        run_identity(cfg)) {
      throw std::runtime_error(
          "resume state was written under a different config");
    }
    ckpt::load_checkpoint(resume_state, *built.store);
    optimizer->load_state_arrays(*built.store, archive.arrays);
    start_step = archive.meta.step;
    loss_history = archive.meta.loss_history;
  }

  const std::int64_t steps_per_epoch =
      static_cast<std::int64_t>(pairs.size());
  std::int64_t target = static_cast<std::int64_t>(cfg.epochs) * steps_per_epoch;
  if (cfg.max_steps > 0) target = std::min(target, cfg.max_steps);
  if (cfg.arm == cfg::Arm::kGroundingOnly) target = start_step;

  std::ofstream log_file(result.log_path, std::ios::trunc);
  if (!log_file) {
    throw std::runtime_error("cannot write loss log: " +
                             result.log_path.string());
  }

  const auto wall_start = std::chrono::steady_clock::now();
  std::vector<int> order;
  std::int64_t order_epoch = -1;
  for (std::int64_t s = start_step; s < target; ++s) {
    const std::int64_t epoch = s / steps_per_epoch;
    if (epoch != order_epoch) {
      order = epoch_order(cfg.seed, epoch, pairs.size());
      order_epoch = epoch;
    }
    const auto [v, anchor] =
        pairs[static_cast<std::size_t>(order[s % steps_per_epoch])];
    const VideoContext& ctx = contexts[static_cast<std::size_t>(v)];
    const int total_frames = static_cast<int>(ctx.view.frames->size());
    const int window = std::min(cfg.clip_len, total_frames);
    const int n_expr = static_cast<int>(ctx.view.expressions.size());
    const StepDraw draw =
        draw_for_step(cfg.seed, s, total_frames, window, n_expr, anchor);

    nn::Graph g;
    const model::TextEncoding& text_anchor =
        ctx.texts[static_cast<std::size_t>(anchor)];
    const std::span<const Image> frames(
        ctx.view.frames->data() + draw.window_start,
        static_cast<std::size_t>(window));
    const std::vector<model::FrameForward> fwd =
        built.proposal->forward_clip(g, frames, text_anchor);

    const int obj =
        ctx.view.expressions[static_cast<std::size_t>(anchor)].object_index;
    std::vector<geom::BoundingBox> gt;
    std::vector<nn::Tensor> selected;
    std::vector<nn::Tensor> logits;
    std::vector<int> positive_index;
    gt.reserve(fwd.size());
    for (std::size_t t = 0; t < fwd.size(); ++t) {
      const geom::BoundingBox gt_box =
          (*ctx.view.gt_boxes)[static_cast<std::size_t>(draw.window_start) + t]
                              [static_cast<std::size_t>(obj)];
      gt.push_back(gt_box);
      selected.push_back(fwd[t].selected_box);
      logits.push_back(fwd[t].conf_logits);
      int best = 0;
      double best_iou = -1.0;
      const auto& props = fwd[t].proposals.proposals;
      for (std::size_t q = 0; q < props.size(); ++q) {
        // Raw squashed boxes can be thinner than the validator's minimum
        // extent; match on the clamped version (what prompting would use).
        const double value =
            geom::iou(geom::clamp_to_unit(props[q].box), gt_box);
        if (value > best_iou) {
          best_iou = value;
          best = static_cast<int>(q);
        }
      }
      positive_index.push_back(best);
    }

    const nn::Tensor loss_box = loss::box_loss_graph(g, selected, gt,
                                                     cfg.weights);
    const nn::Tensor loss_cls =
        loss::confidence_loss_graph(g, logits, positive_index);
    nn::Tensor total =
        g.add(loss_box, g.scale(loss_cls, cfg.weights.lambda_cls));

    double textcon_value = 0.0;
    double modalcon_value = 0.0;
    if (cfg.arm == cfg::Arm::kBoxPlusContra) {
      const model::TextEncoding& text_negative =
          ctx.texts[static_cast<std::size_t>(draw.negative)];
      const std::vector<model::FrameForward> neg =
          built.proposal->forward_clip(g, frames, text_negative);
      std::vector<nn::Tensor> prompt_anchor;
      std::vector<nn::Tensor> prompt_positive;
      std::vector<nn::Tensor> prompt_negative;
      std::vector<nn::Tensor> features;
      for (std::size_t t = 0; t < fwd.size(); ++t) {
        prompt_anchor.push_back(
            built.frozen->prompt_encode(g, fwd[t].selected_box));
        prompt_positive.push_back(built.frozen->prompt_encode(g, gt[t]));
        prompt_negative.push_back(
            built.frozen->prompt_encode(g, neg[t].selected_box));
        features.push_back(built.frozen->frozen_image_encode(
            g, frames[static_cast<std::size_t>(t)]));
      }
      const nn::Tensor loss_text = loss::textcon_loss_graph(
          g, prompt_anchor, prompt_positive, prompt_negative, cfg.contrast);
      const nn::Tensor video_feature =
          built.frozen->aggregate_video_feature(g, prompt_anchor, features);
      const std::vector<double> z_pos =
          built.frozen->sentence_feature(text_anchor.z);
      const std::vector<double> z_neg =
          built.frozen->sentence_feature(text_negative.z);
      const nn::Tensor sent_pos = g.constant(
          nn::TensorShape{1, static_cast<int>(z_pos.size())}, z_pos);
      const nn::Tensor sent_neg = g.constant(
          nn::TensorShape{1, static_cast<int>(z_neg.size())}, z_neg);
      const nn::Tensor loss_modal = loss::modalcon_loss_graph(
          g, video_feature, sent_pos, sent_neg, cfg.contrast);
      total = g.add(total, g.add(g.scale(loss_text, cfg.weights.lambda_f),
                                 g.scale(loss_modal, cfg.weights.lambda_v)));
      textcon_value = loss_text.value(0, 0);
      modalcon_value = loss_modal.value(0, 0);
    }

    built.store->zero_grads();
    g.backward(total);
    clip_gradients(*built.store, cfg.grad_clip);
    if (cfg.warmup_steps > 0) {
      const double ramp = std::min(
          1.0, static_cast<double>(s + 1) / cfg.warmup_steps);
      optimizer->set_lr(cfg.lr * ramp);
    }
    optimizer->step(*built.store);

    loss::LossBreakdown breakdown;
    breakdown.box = loss_box.value(0, 0);
    breakdown.cls = loss_cls.value(0, 0);
    breakdown.textcon = textcon_value;
    breakdown.modalcon = modalcon_value;
    breakdown.total = total.value(0, 0);
    result.history.push_back(breakdown);
    loss_history.push_back(breakdown.total);

    nlohmann::json record;
    record["step"] = s;
    record["epoch"] = epoch;
    record["video"] = ctx.id;
    record["expression"] = anchor;
    record["negative"] = draw.negative;
    record["box"] = breakdown.box;
    record["cls"] = breakdown.cls;
    record["textcon"] = breakdown.textcon;
    record["modalcon"] = breakdown.modalcon;
    record["total"] = breakdown.total;
    log_file << record.dump() << '\n';

    if (progress != nullptr && ((s - start_step) % 25 == 0 || s + 1 == target)) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                        wall_start)
              .count();
      char line[160];
      std::snprintf(line, sizeof(line),
                    "step %lld/%lld epoch %lld total %.4f wall %.1fs",
                    static_cast<long long>(s + 1),
                    static_cast<long long>(target),
                    static_cast<long long>(epoch), breakdown.total, elapsed);
      (*progress) << line << std::endl;
    }
  }
  log_file.close();
  if (!log_file) {
    throw std::runtime_error("failed writing loss log: " +
                             result.log_path.string());
  }

  const int completed_epochs =
      static_cast<int>(target / steps_per_epoch);
  const ckpt::CheckpointMeta meta =
      make_meta(cfg, completed_epochs, target, std::move(loss_history));
  ckpt::save_checkpoint(result.checkpoint_path, meta, *built.store);
  std::vector<ckpt::NamedArray> state = ckpt::parameter_arrays(*built.store);
  for (ckpt::NamedArray& arr : optimizer->state_arrays(*built.store)) {
    state.push_back(std::move(arr));
  }
  ckpt::write_archive(result.state_path, meta, state);
  result.steps = target - start_step;
  return result;
}

std::vector<InferenceFrame> infer(const BuiltModel& built,
                                  const std::vector<Image>& frames,
                                  const std::string& sentence,
                                  const seg::SegmentAdapter& adapter,
                                  int max_frames) {
  const data::Vocabulary vocab;
  const model::TextEncoding text =
      built.proposal->encode_text(vocab.tokenize(sentence));
  const int limit =
      max_frames < 0
          ? static_cast<int>(frames.size())
          : std::min<int>(max_frames, static_cast<int>(frames.size()));
  std::vector<InferenceFrame> out;
  out.reserve(static_cast<std::size_t>(limit));
  for (int t = 0; t < limit; ++t) {
    // One graph per frame: nothing carries over, so emitting frame t only
    // ever touches frames[t].
    nn::Graph g;
    const model::FrameForward fwd = built.proposal->forward_frame(
        g, frames[static_cast<std::size_t>(t)], text);
    InferenceFrame frame;
    frame.box = geom::clamp_to_unit(box_from_tensor(fwd.selected_box));
    frame.confidence =
        fwd.proposals.proposals[static_cast<std::size_t>(fwd.selected_index)]
            .confidence;
    try {
      const SoftMask soft =
          adapter.segment(t, frames[static_cast<std::size_t>(t)], frame.box);
      frame.mask = binarize(soft);
    } catch (const std::exception& e) {
      throw std::runtime_error("adapter " + adapter.name() +
                               " failed at frame " + std::to_string(t) + ": " +
                               e.what());
    }
    out.push_back(std::move(frame));
  }
  return out;
}

EvalResult evaluate(const BuiltModel& built, const data::Dataset& dataset,
                    const EvalOptions& opts) {
  EvalResult result;
  std::vector<metrics::PredictionSet> predictions;
  double iou_sum = 0.0;
  std::int64_t iou_count = 0;
  for (const data::VideoSample& sample : dataset.samples) {
    const std::unique_ptr<seg::SegmentAdapter> adapter =
        seg::make_adapter(opts.adapter, sample);
    for (std::size_t k = 0; k < sample.expressions.size(); ++k) {
      const data::Expression& expr = sample.expressions[k];
      const std::size_t obj = static_cast<std::size_t>(expr.object_index);
      metrics::PredictionSet pred;
      pred.video_id = sample.id;
      pred.expression_index = static_cast<int>(k);
      if (opts.use_gt_boxes) {
        for (std::size_t t = 0; t < sample.frames.size(); ++t) {
          const geom::BoundingBox gt_box = sample.gt_boxes[t][obj];
          const geom::BoundingBox prompt = geom::clamp_to_unit(gt_box);
          const SoftMask soft =
              adapter->segment(static_cast<int>(t), sample.frames[t], prompt);
          pred.masks.push_back(binarize(soft));
          iou_sum += geom::iou(prompt, gt_box);
          ++iou_count;
        }
      } else {
        const std::vector<InferenceFrame> inferred =
            infer(built, sample.frames, expr.text, *adapter);
        for (std::size_t t = 0; t < inferred.size(); ++t) {
          pred.masks.push_back(inferred[t].mask);
          iou_sum += geom::iou(inferred[t].box, sample.gt_boxes[t][obj]);
          ++iou_count;
        }
      }
      predictions.push_back(std::move(pred));
    }
  }
  result.report = metrics::evaluate_dataset(dataset, predictions,
                                            opts.protocol, &result.per_frame);
  result.box_iou_mean =
      iou_count > 0 ? iou_sum / static_cast<double>(iou_count) : 0.0;
  return result;
}

std::string eval_result_to_json(const EvalResult& result) {
  nlohmann::json j;
  j["box_iou_mean"] = result.box_iou_mean;
  j["box"] = 100.0 * result.box_iou_mean;
  j["metrics"] = nlohmann::json::parse(metrics::report_to_json(result.report));
  return j.dump(2);
}

std::vector<AblationRow> ablate(const cfg::RunConfig& cfg,
                                const std::filesystem::path& out_dir,
                                std::ostream* progress) {
  cfg.validate();
  const data::Dataset dataset = data::load_dataset(cfg.data_dir);
  EvalOptions eval_opts;
  eval_opts.protocol = metrics::protocol_from_name(cfg.protocol);
  eval_opts.adapter = cfg.adapter;

  std::filesystem::create_directories(out_dir);
  std::vector<AblationRow> rows;
  const auto push_row = [&rows](const std::string& label,
                                const EvalResult& r) {
    AblationRow row;
    row.label = label;
    row.box = 100.0 * r.box_iou_mean;
    row.jf = r.report.jf_mean;
    row.j = r.report.j_mean;
    row.f = r.report.f_mean;
    rows.push_back(row);
  };

  // Row 1: the untrained grounding baseline.
  const BuiltModel baseline = build_model(cfg);
  push_row("baseline", evaluate(baseline, dataset, eval_opts));

  // Rows 2-3: trained arms.
  for (const cfg::Arm arm : {cfg::Arm::kBoxOnly, cfg::Arm::kBoxPlusContra}) {
    cfg::RunConfig arm_cfg = cfg;
    arm_cfg.arm = arm;
    const std::string label = cfg::arm_name(arm);
    const TrainResult trained =
        train(arm_cfg, out_dir / label, {}, progress);
    const BuiltModel model = load_model(trained.checkpoint_path);
    push_row(label, evaluate(model, dataset, eval_opts));
  }

  // Row 4: ground-truth boxes as prompts.
  EvalOptions upper = eval_opts;
  upper.use_gt_boxes = true;
  push_row("upper_bound", evaluate(baseline, dataset, upper));

  std::ofstream json_file(out_dir / "ablation.json", std::ios::trunc);
  json_file << ablation_to_json(rows) << '\n';
  std::ofstream table_file(out_dir / "ablation.txt", std::ios::trunc);
  table_file << ablation_table(rows);
  return rows;
}

std::string ablation_table(std::span<const AblationRow> rows) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %6s %7s %7s %7s\n", "arm", "Box",
                "J&F", "J", "F");
  out += line;
  for (const AblationRow& row : rows) {
    std::snprintf(line, sizeof(line), "%-16s %6.1f %7.3f %7.3f %7.3f\n",
                  row.label.c_str(), row.box, row.jf, row.j, row.f);
    out += line;
  }
  return out;
}

std::string ablation_to_json(std::span<const AblationRow> rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const AblationRow& row : rows) {
    nlohmann::json j;
    j["arm"] = row.label;
    j["box"] = row.box;
    j["jf"] = row.jf;
    j["j"] = row.j;
    j["f"] = row.f;
    arr.push_back(j);
  }
  return arr.dump(2);
}

}  // namespace refprompt::pipe
