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

#ifndef REFPROMPT_MODEL_HPP_
#define REFPROMPT_MODEL_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "refprompt/geometry.hpp"
#include "refprompt/graph.hpp"
#include "refprompt/image.hpp"
#include "refprompt/params.hpp"

namespace refprompt::model {

/// Ties a vocabulary token to a unit direction in raw-pixel colour space.
/// The constructor seeds matching structure into the frozen word table and
/// the patch projection so token/patch similarity starts out meaningful,
/// standing in for the aligned pretraining a production grounding backbone
/// would bring to fine-tuning.
struct AppearanceCue {
  int token_id = -1;
  std::array<double, 3> direction{0.0, 0.0, 0.0};
};

struct ModelConfig {
  int height = 64;
  int width = 64;
  int dim = 64;         // token dimension D
  int patch = 8;        // square patch side in pixels
  int n_queries = 8;    // object queries per frame
  int heads = 4;        // attention heads
  int layers = 6;       // cross-modality decoder depth
  int l_max = 12;       // tokenized sentence length
  int ffn_hidden = 256;
  int vocab_size = 20;
  /// Zero-initialize every residual output projection so the decoder is
  /// exactly the identity on queries at initialization.
  bool zero_init_residual = true;
  /// Colour-word grounding seeded at construction (see AppearanceCue).
  std::vector<AppearanceCue> appearance_cues;

  int n_visual_tokens() const { return (height / patch) * (width / patch); }
  int patch_values() const { return patch * patch * 3; }

  /// Throws std::invalid_argument on inconsistent dimensions.
  void validate() const;
};

/// Output of the frozen text encoder: per-token vectors, the pad mask, and
/// the pooled sentence vector z (mean of non-pad token vectors). Values are
/// plain numbers, not graph tensors: the table is frozen, so nothing here
/// ever needs a gradient.
struct TextEncoding {
  std::vector<int> ids;                // l_max
  std::vector<double> tokens;          // l_max x dim, row-major
  std::vector<std::uint8_t> keep;      // 1 = non-pad position
  std::vector<double> z;               // 1 x dim pooled sentence vector
};

struct Proposal {
  geom::BoundingBox box;
  double confidence = 0.0;
};

struct ProposalSet {
  std::vector<Proposal> proposals;  // one per query, query order
};

/// Index of the highest-confidence proposal; ties break to the lowest query
/// index. Throws std::invalid_argument on an empty set.
int select_top(const ProposalSet& proposals);

/// Per-frame forward result. Tensors stay attached to the Graph that built
/// them so losses can flow gradients back into the model.
struct FrameForward {
  nn::Tensor boxes;         // n_queries x 4, squashed to (0,1)
  nn::Tensor confidences;   // n_queries x 1, in (0,1)
  nn::Tensor conf_logits;   // n_queries x 1
  nn::Tensor selected_box;  // 1 x 4 row of `boxes`
  int selected_index = 0;
  std::vector<int> query_token_indices;  // provenance of each query
  ProposalSet proposals;                 // value snapshot of boxes+confidences
};

/// The trainable text-conditioned box-proposal generator: convolutional patch
/// embedding, frozen seeded token-embedding table, similarity-based query
/// selection, a pre-norm cross-modality decoder, and box/confidence heads.
class ProposalModel {
 public:
  /// Registers all parameters in `store` (trainable except the text
  /// embedding table) and initializes them from `seed`.
  ProposalModel(const ModelConfig& config, nn::ParameterStore& store,
                std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& store() const { return *store_; }

  /// Frozen text encoding; throws std::invalid_argument on a bad id.
  TextEncoding encode_text(const std::vector<int>& token_ids) const;

  /// Patch embedding + positional encoding -> n_visual_tokens x dim.
  nn::Tensor encode_frame(nn::Graph& g, const Image& frame) const;

  /// Indices of the n_queries visual tokens with the highest
  /// max-over-non-pad-text dot product, ordered by descending score (ties:
  /// lowest token index). Throws when n_queries > token count.
  std::vector<int> select_query_tokens(const nn::Tensor& visual,
                                       const TextEncoding& text) const;

  /// Per-token text-similarity features, built in-graph (n_visual_tokens x 2)
  /// so the confidence head can consume them differentiably and train the
  /// text-visual alignment. Column 0 is the max-over-non-pad-tokens dot
  /// product select_query_tokens ranks by; column 1 is the dot product with
  /// the pooled sentence vector z, which gives every word of the sentence a
  /// gradient instead of only the word that wins the max.
  nn::Tensor query_scores(nn::Graph& g, nn::Tensor visual,
                          const TextEncoding& text) const;

  /// Gathered visual tokens plus the learned per-slot content embedding.
  nn::Tensor make_queries(nn::Graph& g, nn::Tensor visual,
                          const std::vector<int>& token_indices) const;

  /// The cross-modality decoder. `use_text` = false skips the text
  /// cross-attention sublayer (used by sensitivity tests and ablations).
  nn::Tensor decode(nn::Graph& g, nn::Tensor queries, nn::Tensor visual,
                    const TextEncoding& text, bool use_text = true) const;

  /// Box + confidence heads and highest-confidence selection. Each query's
  /// box logits are offsets from its seed token's grid position (the
  /// provenance carried by `token_indices`), so proposals start anchored at
  /// the image locations that scored highest against the text. `seed_scores`
  /// (n_queries x 2) carries each query's text-similarity features; the
  /// confidence head reads [decoded query, scores] through one linear layer.
  FrameForward predict(nn::Graph& g, nn::Tensor decoded_queries,
                       const std::vector<int>& token_indices,
                       nn::Tensor seed_scores) const;

  FrameForward forward_frame(nn::Graph& g, const Image& frame,
                             const TextEncoding& text) const;

  /// Processes frames independently in order; the result for frame t depends
  /// only on frames[t] (and the text), never on other frames.
  std::vector<FrameForward> forward_clip(nn::Graph& g,
                                         std::span<const Image> frames,
                                         const TextEncoding& text) const;

 private:
  struct AttnNames {
    std::string wq, bq, wk, bk, wv, bv, wo, bo;
  };

  nn::Tensor attention(nn::Graph& g, nn::Tensor query_input,
                       nn::Tensor memory, const AttnNames& names,
                       const std::vector<std::uint8_t>* keep) const;
  nn::Tensor layer_norm(nn::Graph& g, nn::Tensor x,
                        const std::string& prefix) const;

  ModelConfig config_;
  nn::ParameterStore* store_;
};

}  // namespace refprompt::model

#endif  // REFPROMPT_MODEL_HPP_
