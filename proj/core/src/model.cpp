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

#include "refprompt/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace refprompt::model {

namespace {

constexpr double kEmbedStddev = 0.125;  // ~unit-norm 64-d token vectors

// Query content embeddings carry rank identity on top of the seed token.
// Kept quiet: queries already differ through their seed tokens and anchors,
// and when rank identity is the loudest feature the box head learns
// rank-constant offsets that drag every box the same way regardless of where
// its seed actually is.
constexpr double kContentStddev = 0.1;

// The patch projection maps raw pixel values, whose linear image is far
// quieter than the O(1) sine position table added right after it. Attention
// keys see content + position summed, so with plain Xavier the keys are
// position-dominated and content-selective attention is slow to emerge. The
// boosted init keeps patch content the louder term.
constexpr double kPatchGain = 4.0;

// Extent priors for anchor-initialized proposals. Ranks alternate between a
// small and a large prior so every seeded location offers both a small and a
// large starting box; IoU-based matching then hands each object a
// size-appropriate anchor and the head only refines sub-cell position.
constexpr double kExtentPriorSmall = 0.15;
constexpr double kExtentPriorLarge = 0.24;

// Appearance cues: gain on the colour direction added to a word-table row,
// and on the per-channel patch-mean extractor written into the first three
// patch projection columns. Both are large enough that cue similarity stays
// the loudest term at selection time against the sine position table and the
// random remainder of the embedding.
constexpr double kCueTextGain = 4.0;
constexpr double kCuePatchGain = 8.0;

// Initial weight on the two seed-score confidence features (see head.conf).
constexpr double kScoreWeightInit = 0.1;

/// Standard 2D sine table: the first half of the channels encodes the patch
/// row, the second half the column, each as interleaved sin/cos over
/// geometrically spaced wavelengths. The box head regresses coordinates, so
/// a token's position must be as loud a feature as its content from the very
/// first step; the table stays trainable.
void fill_sine_positions(nn::Parameter& pos, int grid_h, int grid_w, int d) {
  const int half = d / 2;
  const double scale = 2.0 * std::numbers::pi;
  for (int gy = 0; gy < grid_h; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      const int row = gy * grid_w + gx;
      const double py = (gy + 0.5) / grid_h;
      const double px = (gx + 0.5) / grid_w;
      for (int i = 0; i < d; ++i) {
        const bool is_x = i >= half;
        const int k = is_x ? i - half : i;
        const double p = is_x ? px : py;
        const double wavelength =
            std::pow(10000.0, (2.0 * (k / 2)) / static_cast<double>(half));
        const double angle = p * scale / wavelength;
        pos.value[static_cast<std::size_t>(row) * d + i] =
            (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
      }
    }
  }
}

std::string layer_prefix(int layer) {
  return "decoder.l" + std::to_string(layer) + ".";
}

}  // namespace

void ModelConfig::validate() const {
  if (height <= 0 || width <= 0 || patch <= 0 || height % patch != 0 ||
      width % patch != 0) {
    throw std::invalid_argument("model config: frame size must be a multiple "
                                "of the patch size");
  }
  if (dim <= 0 || heads <= 0 || dim % heads != 0) {
    throw std::invalid_argument("model config: dim must divide evenly into "
                                "heads");
  }
  if (n_queries <= 0 || n_queries > n_visual_tokens()) {
    throw std::invalid_argument(
        "model config: n_queries must be in [1, n_visual_tokens]");
  }
  if (layers <= 0 || l_max <= 0 || ffn_hidden <= 0 || vocab_size <= 0) {
    throw std::invalid_argument("model config: non-positive dimension");
  }
}

int select_top(const ProposalSet& proposals) {
  if (proposals.proposals.empty()) {
    throw std::invalid_argument("select_top: empty proposal set");
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(proposals.proposals.size()); ++i) {
    if (proposals.proposals[i].confidence >
        proposals.proposals[best].confidence) {
      best = i;
    }
  }
  return best;
}

ProposalModel::ProposalModel(const ModelConfig& config,
                             nn::ParameterStore& store, std::uint64_t seed)
    : config_(config), store_(&store) {
  config_.validate();
  const int d = config_.dim;
  const int nv = config_.n_visual_tokens();

  auto dense = [&](const std::string& name, int rows, int cols,
                   bool zero_weight, double gain = 1.0) {
    auto& w = store.create(name + ".w", {rows, cols}, /*trainable=*/true);
    if (zero_weight) {
      nn::init_zeros(w);
    } else {
      nn::init_xavier_uniform(w, seed, gain);
    }
    nn::init_zeros(store.create(name + ".b", {1, cols}, /*trainable=*/true));
  };
  auto norm = [&](const std::string& name) {
    auto& gain = store.create(name + ".gain", {1, d}, /*trainable=*/true);
    std::fill(gain.value.begin(), gain.value.end(), 1.0);
    nn::init_zeros(store.create(name + ".bias", {1, d}, /*trainable=*/true));
  };

  dense("backbone.patch", config_.patch_values(), d, false, kPatchGain);
  fill_sine_positions(store.create("backbone.pos", {nv, d}, /*trainable=*/true),
                      config_.height / config_.patch,
                      config_.width / config_.patch, d);
  nn::init_normal(
      store.create("queries.content", {config_.n_queries, d},
                   /*trainable=*/true),
      seed, kContentStddev);

  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = layer_prefix(l);
    for (const char* sub : {"self", "xvis", "xtxt"}) {
      dense(p + sub + ".q", d, d, false);
      dense(p + sub + ".k", d, d, false);
      dense(p + sub + ".v", d, d, false);
      dense(p + sub + ".o", d, d, config_.zero_init_residual);
    }
    dense(p + "ffn.1", d, config_.ffn_hidden, false);
    dense(p + "ffn.2", config_.ffn_hidden, d, config_.zero_init_residual);
    norm(p + "ln1");
    norm(p + "ln2");
    norm(p + "ln3");
    norm(p + "ln4");
  }

  dense("head.box.1", d, d, false);
  dense("head.box.2", d, d, false);
  dense("head.box.3", d, 4, /*zero_weight=*/true);  // boxes start at anchors
  // Confidence input is [decoded query (d), seed text-similarity scores (2)].
  // The score weights start small but nonzero — zero would stall the routing
  // loss until the weights grow, while 1.0 turns cue-scaled scores into
  // saturated logits that the first steps must spend unwinding.
  dense("head.conf", d + 2, 1, /*zero_weight=*/true);
  store.at("head.conf.w").value[d] = kScoreWeightInit;
  store.at("head.conf.w").value[d + 1] = kScoreWeightInit;

  nn::init_normal(
      store.create("text.embed", {config_.vocab_size, d}, /*trainable=*/false),
      seed, kEmbedStddev);

  if (!config_.appearance_cues.empty()) {
    auto& table = store.at("text.embed");
    for (const auto& cue : config_.appearance_cues) {
      if (cue.token_id < 0 || cue.token_id >= config_.vocab_size) {
        throw std::invalid_argument("appearance cue: token id out of range");
      }
      for (int c = 0; c < 3 && c < d; ++c) {
        table.value[static_cast<std::size_t>(cue.token_id) * d + c] +=
            kCueTextGain * cue.direction[c];
      }
    }
    // The first three patch projection columns become per-channel means, so
    // the cue dimensions of a visual token report its raw colour in the same
    // basis the word rows above point along.
    auto& patch_w = store.at("backbone.patch.w");
    const int pv = config_.patch_values();
    const double per_pixel = 1.0 / (config_.patch * config_.patch);
    for (int k = 0; k < pv; ++k) {
      for (int c = 0; c < 3 && c < d; ++c) {
        patch_w.value[static_cast<std::size_t>(k) * d + c] =
            (k % 3 == c) ? kCuePatchGain * per_pixel : 0.0;
      }
    }
  }
}

TextEncoding ProposalModel::encode_text(
    const std::vector<int>& token_ids) const {
  if (static_cast<int>(token_ids.size()) != config_.l_max) {
    throw std::invalid_argument("encode_text: expected exactly l_max ids");
  }
  const auto& table = store_->at("text.embed");
  const int d = config_.dim;
  TextEncoding enc;
  enc.ids = token_ids;
  enc.tokens.assign(static_cast<std::size_t>(config_.l_max) * d, 0.0);
  enc.keep.assign(config_.l_max, 0);
  enc.z.assign(d, 0.0);
  int n_keep = 0;
  for (int i = 0; i < config_.l_max; ++i) {
    const int id = token_ids[i];
    if (id < 0 || id >= config_.vocab_size) {
      throw std::invalid_argument("encode_text: invalid token id " +
                                  std::to_string(id));
    }
    for (int c = 0; c < d; ++c) {
      enc.tokens[static_cast<std::size_t>(i) * d + c] =
          table.value[static_cast<std::size_t>(id) * d + c];
    }
    if (id != 0) {  // pad id
      enc.keep[i] = 1;
      ++n_keep;
      for (int c = 0; c < d; ++c) {
        enc.z[c] += enc.tokens[static_cast<std::size_t>(i) * d + c];
      }
    }
  }
  if (n_keep == 0) {
    throw std::invalid_argument("encode_text: all-pad token sequence");
  }
  for (int c = 0; c < d; ++c) enc.z[c] /= n_keep;
  return enc;
}

nn::Tensor ProposalModel::encode_frame(nn::Graph& g, const Image& frame) const {
  if (frame.height != config_.height || frame.width != config_.width) {
    throw std::invalid_argument("encode_frame: frame size mismatch");
  }
  const int p = config_.patch;
  const int nv = config_.n_visual_tokens();
  const int pv = config_.patch_values();
  std::vector<double> patches(static_cast<std::size_t>(nv) * pv, 0.0);
  const int grid_w = config_.width / p;
  double frame_mean = 0.0;
  for (int gy = 0; gy < config_.height / p; ++gy) {
    for (int gx = 0; gx < grid_w; ++gx) {
      const int token = gy * grid_w + gx;
      int k = 0;
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          for (int c = 0; c < 3; ++c) {
            const double v = frame.at(gy * p + y, gx * p + x, c) / 255.0;
            patches[static_cast<std::size_t>(token) * pv + k++] = v;
            frame_mean += v;
          }
        }
      }
    }
  }
  // Frame-mean subtraction: patches that look like the frame's dominant
  // appearance project near the zero vector, so token content norm tracks
  // how much a patch stands out — uniformly across a region's interior, not
  // just at its edges. Query selection scores tokens by dot product against
  // text vectors; without centering, whether a flat background patch
  // outranks an object is a coin flip per sentence.
  frame_mean /= static_cast<double>(patches.size());
  for (double& v : patches) v -= frame_mean;
  nn::Tensor tokens = g.add_row(
      g.matmul(g.constant({nv, pv}, std::move(patches)),
               g.input(store_->at("backbone.patch.w"))),
      g.input(store_->at("backbone.patch.b")));
  return g.add(tokens, g.input(store_->at("backbone.pos")));
}

std::vector<int> ProposalModel::select_query_tokens(
    const nn::Tensor& visual, const TextEncoding& text) const {
  const int nv = visual.rows();
  const int d = config_.dim;
  if (config_.n_queries > nv) {
    throw std::invalid_argument("select_query_tokens: n_queries > tokens");
  }
  std::vector<double> scores(nv, 0.0);
  for (int k = 0; k < nv; ++k) {
    double best = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < config_.l_max; ++l) {
      if (!text.keep[l]) continue;
      double dot = 0.0;
      for (int c = 0; c < d; ++c) {
        dot += visual.value(k, c) *
               text.tokens[static_cast<std::size_t>(l) * d + c];
      }
      best = std::max(best, dot);
    }
    scores[k] = best;
  }
  std::vector<int> order(nv);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[a] > scores[b];  // stable: ties keep the lower index first
  });
  order.resize(config_.n_queries);
  return order;
}

nn::Tensor ProposalModel::query_scores(nn::Graph& g, nn::Tensor visual,
                                       const TextEncoding& text) const {
  nn::Tensor txt = g.constant({config_.l_max, config_.dim}, text.tokens);
  nn::Tensor all = g.matmul(visual, g.transpose(txt));  // nv x l_max
  nn::Tensor best;
  bool first = true;
  for (int l = 0; l < config_.l_max; ++l) {
    if (!text.keep[l]) continue;
    nn::Tensor col = g.slice_cols(all, l, l + 1);
    best = first ? col : g.maximum(best, col);
    first = false;
  }
  if (first) throw std::invalid_argument("query_scores: all-pad text");
  nn::Tensor z = g.constant({1, config_.dim}, text.z);
  nn::Tensor pooled = g.matmul(visual, g.transpose(z));  // nv x 1
  const std::vector<nn::Tensor> cols = {best, pooled};
  return g.concat_cols(cols);
}

nn::Tensor ProposalModel::make_queries(
    nn::Graph& g, nn::Tensor visual,
    const std::vector<int>& token_indices) const {
  if (static_cast<int>(token_indices.size()) != config_.n_queries) {
    throw std::invalid_argument("make_queries: expected n_queries indices");
  }
  return g.add(g.gather_rows(visual, token_indices),
               g.input(store_->at("queries.content")));
}

nn::Tensor ProposalModel::layer_norm(nn::Graph& g, nn::Tensor x,
                                     const std::string& prefix) const {
  return g.layer_norm_rows(x, g.input(store_->at(prefix + ".gain")),
                           g.input(store_->at(prefix + ".bias")));
}

nn::Tensor ProposalModel::attention(nn::Graph& g, nn::Tensor query_input,
                                    nn::Tensor memory, const AttnNames& names,
                                    const std::vector<std::uint8_t>* keep) const {
  const int d = config_.dim;
  const int dh = d / config_.heads;
  nn::Tensor q = g.add_row(g.matmul(query_input, g.input(store_->at(names.wq))),
                           g.input(store_->at(names.bq)));
  nn::Tensor k = g.add_row(g.matmul(memory, g.input(store_->at(names.wk))),
                           g.input(store_->at(names.bk)));
  nn::Tensor v = g.add_row(g.matmul(memory, g.input(store_->at(names.wv))),
                           g.input(store_->at(names.bv)));
  std::vector<nn::Tensor> heads;
  for (int h = 0; h < config_.heads; ++h) {
    nn::Tensor qh = g.slice_cols(q, h * dh, (h + 1) * dh);
    nn::Tensor kh = g.slice_cols(k, h * dh, (h + 1) * dh);
    nn::Tensor vh = g.slice_cols(v, h * dh, (h + 1) * dh);
    nn::Tensor scores =
        g.scale(g.matmul(qh, g.transpose(kh)), 1.0 / std::sqrt(dh));
    heads.push_back(g.matmul(g.softmax_rows(scores, keep), vh));
  }
  nn::Tensor merged = g.concat_cols(heads);
  return g.add_row(g.matmul(merged, g.input(store_->at(names.wo))),
                   g.input(store_->at(names.bo)));
}

nn::Tensor ProposalModel::decode(nn::Graph& g, nn::Tensor queries,
                                 nn::Tensor visual, const TextEncoding& text,
                                 bool use_text) const {
  nn::Tensor txt_tokens = g.constant({config_.l_max, config_.dim}, text.tokens);
  nn::Tensor x = queries;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = layer_prefix(l);
    auto attn_names = [&](const char* sub) {
      return AttnNames{p + sub + ".q.w", p + sub + ".q.b", p + sub + ".k.w",
                       p + sub + ".k.b", p + sub + ".v.w", p + sub + ".v.b",
                       p + sub + ".o.w", p + sub + ".o.b"};
    };
    nn::Tensor normed = layer_norm(g, x, p + "ln1");
    x = g.add(x, attention(g, normed, normed, attn_names("self"), nullptr));
    x = g.add(x, attention(g, layer_norm(g, x, p + "ln2"), visual,
                           attn_names("xvis"), nullptr));
    if (use_text) {
      x = g.add(x, attention(g, layer_norm(g, x, p + "ln3"), txt_tokens,
                             attn_names("xtxt"), &text.keep));
    }
    nn::Tensor h = g.relu(
        g.add_row(g.matmul(layer_norm(g, x, p + "ln4"),
                           g.input(store_->at(p + "ffn.1.w"))),
                  g.input(store_->at(p + "ffn.1.b"))));
    x = g.add(x, g.add_row(g.matmul(h, g.input(store_->at(p + "ffn.2.w"))),
                           g.input(store_->at(p + "ffn.2.b"))));
  }
  return x;
}

FrameForward ProposalModel::predict(
    nn::Graph& g, nn::Tensor decoded_queries,
    const std::vector<int>& token_indices, nn::Tensor seed_scores) const {
  if (static_cast<int>(token_indices.size()) != config_.n_queries) {
    throw std::invalid_argument("predict: expected n_queries seed indices");
  }
  if (seed_scores.rows() != config_.n_queries || seed_scores.cols() != 2) {
    throw std::invalid_argument("predict: seed_scores must be n_queries x 2");
  }
  nn::Tensor h1 = g.relu(
      g.add_row(g.matmul(decoded_queries, g.input(store_->at("head.box.1.w"))),
                g.input(store_->at("head.box.1.b"))));
  nn::Tensor h2 =
      g.relu(g.add_row(g.matmul(h1, g.input(store_->at("head.box.2.w"))),
                       g.input(store_->at("head.box.2.b"))));
  // Anchor each query's logits at its seed token: center at the token's grid
  // cell, extent at a generic object prior. The zero-initialized final layer
  // then means "propose a box exactly at the seed location", and training
  // learns squash-space offsets — local corrections instead of a global
  // search, which keeps plain SGD viable.
  const int grid_w = config_.width / config_.patch;
  const int grid_h = config_.height / config_.patch;
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  std::vector<double> anchors;
  anchors.reserve(static_cast<std::size_t>(config_.n_queries) * 4);
  for (std::size_t rank = 0; rank < token_indices.size(); ++rank) {
    const int idx = token_indices[rank];
    const int gy = idx / grid_w;
    const int gx = idx % grid_w;
    const double prior =
        (rank % 2 == 0) ? kExtentPriorSmall : kExtentPriorLarge;
    anchors.push_back(logit((gx + 0.5) / grid_w));
    anchors.push_back(logit((gy + 0.5) / grid_h));
    anchors.push_back(logit(prior));
    anchors.push_back(logit(prior));
  }
  nn::Tensor box_logits = g.add(
      g.add_row(g.matmul(h2, g.input(store_->at("head.box.3.w"))),
                g.input(store_->at("head.box.3.b"))),
      g.constant({config_.n_queries, 4}, std::move(anchors)));
  FrameForward out{.boxes = g.sigmoid(box_logits),
                   .confidences = {},
                   .conf_logits = {},
                   .selected_box = {},
                   .selected_index = 0,
                   .query_token_indices = {},
                   .proposals = {}};
  // Confidence reads the decoded query together with its seed token's text
  // similarity; gradients through the score column are what teach the patch
  // projection which appearances each word refers to.
  const std::vector<nn::Tensor> conf_in = {decoded_queries, seed_scores};
  out.conf_logits =
      g.add_row(g.matmul(g.concat_cols(conf_in),
                         g.input(store_->at("head.conf.w"))),
                g.input(store_->at("head.conf.b")));
  out.confidences = g.sigmoid(out.conf_logits);
  for (int i = 0; i < config_.n_queries; ++i) {
    Proposal prop;
    prop.box = {out.boxes.value(i, 0), out.boxes.value(i, 1),
                out.boxes.value(i, 2), out.boxes.value(i, 3)};
    prop.confidence = out.confidences.value(i, 0);
    out.proposals.proposals.push_back(prop);
  }
  out.selected_index = select_top(out.proposals);
  out.selected_box = g.gather_rows(out.boxes, {out.selected_index});
  return out;
}

FrameForward ProposalModel::forward_frame(nn::Graph& g, const Image& frame,
                                          const TextEncoding& text) const {
  nn::Tensor visual = encode_frame(g, frame);
  std::vector<int> indices = select_query_tokens(visual, text);
  nn::Tensor queries = make_queries(g, visual, indices);
  nn::Tensor scores = g.gather_rows(query_scores(g, visual, text), indices);
  nn::Tensor decoded = decode(g, queries, visual, text);
  FrameForward out = predict(g, decoded, indices, scores);
  out.query_token_indices = std::move(indices);
  return out;
}

std::vector<FrameForward> ProposalModel::forward_clip(
    nn::Graph& g, std::span<const Image> frames,
    const TextEncoding& text) const {
  std::vector<FrameForward> out;
  out.reserve(frames.size());
  for (const Image& frame : frames) {
    out.push_back(forward_frame(g, frame, text));
  }
  return out;
}

}  // namespace refprompt::model
