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

#ifndef REFPROMPT_GRAPH_HPP
#define REFPROMPT_GRAPH_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "refprompt/params.hpp"

namespace refprompt::nn {

class Graph;

/// Handle to a node in a Graph. Values are computed eagerly at construction;
/// gradients exist after Graph::backward.
class Tensor {
 public:
  Tensor() = default;
  int rows() const;
  int cols() const;
  TensorShape shape() const;
  double value(int r, int c) const;
  double scalar() const;  // requires 1x1
  const std::vector<double>& values() const;
  bool defined() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Tensor(Graph* g, int id) : graph_(g), id_(id) {}
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape over row-major double matrices. A Graph is built fresh
/// per forward pass; backward() walks the tape once in reverse creation
/// order, which is always a valid reverse-topological order.
///
/// Subgradient conventions (fixed for determinism): relu'(0) = 0,
/// d|x|/dx = 0 at 0, min/max ties follow the first argument, and the
/// gradient of l2_norm at the zero vector is 0.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaves.
  Tensor constant(TensorShape shape, std::vector<double> values);
  Tensor constant(TensorShape shape, std::span<const double> values);
  Tensor scalar_constant(double v);
  /// Trainable leaf: backward() accumulates into p.grad.
  Tensor input(Parameter& p);
  /// Value-only leaf for frozen parameters; never receives gradients, so
  /// the frozen contract holds structurally.
  Tensor frozen(const Parameter& p);

  // Linear algebra.
  Tensor matmul(Tensor a, Tensor b);
  Tensor transpose(Tensor a);

  // Elementwise, same shape.
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);
  Tensor div(Tensor a, Tensor b);
  Tensor minimum(Tensor a, Tensor b);
  Tensor maximum(Tensor a, Tensor b);

  /// m (RxC) + row (1xC) broadcast over rows.
  Tensor add_row(Tensor m, Tensor row);

  Tensor scale(Tensor a, double c);
  Tensor add_scalar(Tensor a, double c);

  Tensor relu(Tensor a);
  Tensor sigmoid(Tensor a);
  Tensor abs(Tensor a);
  Tensor sin(Tensor a);
  Tensor cos(Tensor a);

  /// Row-wise softmax. Columns where keep[c] == 0 get probability 0 and
  /// receive no gradient; keep must leave at least one column per row.
  Tensor softmax_rows(Tensor a, const std::vector<std::uint8_t>* keep = nullptr);

  /// Per-row layer normalization followed by a learned affine map.
  Tensor layer_norm_rows(Tensor x, Tensor gain, Tensor bias, double eps = 1e-5);

  Tensor slice_cols(Tensor a, int c0, int c1);
  Tensor concat_cols(std::span<const Tensor> parts);
  Tensor gather_rows(Tensor a, std::vector<int> rows);

  Tensor sum(Tensor a);   // -> 1x1
  Tensor mean(Tensor a);  // -> 1x1

  /// Euclidean norm of a row or column vector -> 1x1.
  Tensor l2_norm(Tensor a);

  /// Mean over entries of BCE computed stably from logits.
  Tensor bce_with_logits_mean(Tensor logits, std::vector<double> targets);

  /// Accumulates d(root)/d(leaf) into every bound Parameter's grad.
  void backward(Tensor root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  friend class Tensor;

  enum class Op : std::uint8_t {
    kConstant, kInput, kMatMul, kTranspose, kAdd, kSub, kMul, kDiv, kMin,
    kMax, kAddRow, kScale, kAddScalar, kRelu, kSigmoid, kAbs, kSin, kCos,
    kSoftmaxRows, kLayerNormRows, kSliceCols, kConcatCols, kGatherRows,
    kSum, kMean, kL2Norm, kBceMean,
  };

  struct Node {
    Op op;
    TensorShape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<int> inputs;
    std::vector<double> aux;     // op-specific (saved stats, targets, scalars)
    std::vector<int> iaux;       // op-specific (indices, column bounds)
    std::vector<std::uint8_t> mask;
    Parameter* param = nullptr;
  };

  Node& node(int id) { return nodes_[id]; }
  const Node& node(int id) const { return nodes_[id]; }
  Tensor make(Op op, TensorShape shape, std::vector<int> inputs);
  void check_same_shape(Tensor a, Tensor b, const char* op) const;
  void backward_node(int id);

  std::vector<Node> nodes_;
};

}  // namespace refprompt::nn

#endif  // REFPROMPT_GRAPH_HPP
