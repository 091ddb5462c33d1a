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

#include "refprompt/graph.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace refprompt::nn {

namespace {

using RowMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

[[maybe_unused]] ConstMapMat map(const std::vector<double>& v,
                                 TensorShape s) {
  return ConstMapMat(v.data(), s.rows, s.cols);
}

MapMat map(std::vector<double>& v, TensorShape s) {
  return MapMat(v.data(), s.rows, s.cols);
}

}  // namespace

int Tensor::rows() const { return graph_->node(id_).shape.rows; }
int Tensor::cols() const { return graph_->node(id_).shape.cols; }
TensorShape Tensor::shape() const { return graph_->node(id_).shape; }

double Tensor::value(int r, int c) const {
  const auto& n = graph_->node(id_);
  return n.value[static_cast<std::size_t>(r) * n.shape.cols + c];
}

double Tensor::scalar() const {
  const auto& n = graph_->node(id_);
  if (n.shape.size() != 1) {
    throw std::logic_error("Tensor::scalar on non-scalar tensor");
  }
  return n.value[0];
}

const std::vector<double>& Tensor::values() const {
  return graph_->node(id_).value;
}

Tensor Graph::make(Op op, TensorShape shape, std::vector<int> inputs) {
  Node n;
  n.op = op;
  n.shape = shape;
  n.value.assign(shape.size(), 0.0);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size()) - 1);
}

void Graph::check_same_shape(Tensor a, Tensor b, const char* op) const {
  if (!(node(a.id_).shape == node(b.id_).shape)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }
}

Tensor Graph::constant(TensorShape shape, std::vector<double> values) {
  if (static_cast<int>(values.size()) != shape.size()) {
    throw std::invalid_argument("Graph::constant: size mismatch");
  }
  Tensor t = make(Op::kConstant, shape, {});
  node(t.id_).value = std::move(values);
  return t;
}

Tensor Graph::constant(TensorShape shape, std::span<const double> values) {
  return constant(shape, std::vector<double>(values.begin(), values.end()));
}

Tensor Graph::scalar_constant(double v) { return constant({1, 1}, {v}); }

Tensor Graph::input(Parameter& p) {
  Tensor t = make(Op::kInput, p.shape, {});
  node(t.id_).value = p.value;
  node(t.id_).param = &p;
  return t;
}

Tensor Graph::frozen(const Parameter& p) {
  Tensor t = make(Op::kConstant, p.shape, {});
  node(t.id_).value = p.value;
  return t;
}

Tensor Graph::matmul(Tensor a, Tensor b) {
  const auto& na = node(a.id_);
  const auto& nb = node(b.id_);
  if (na.shape.cols != nb.shape.rows) {
    throw std::invalid_argument("matmul: inner dimension mismatch");
  }
  Tensor t = make(Op::kMatMul, {na.shape.rows, nb.shape.cols}, {a.id_, b.id_});
  auto& nt = node(t.id_);
  map(nt.value, nt.shape) = map(node(a.id_).value, node(a.id_).shape) *
                            map(node(b.id_).value, node(b.id_).shape);
  return t;
}

Tensor Graph::transpose(Tensor a) {
  const auto sa = node(a.id_).shape;
  Tensor t = make(Op::kTranspose, {sa.cols, sa.rows}, {a.id_});
  auto& nt = node(t.id_);
  map(nt.value, nt.shape) = map(node(a.id_).value, sa).transpose();
  return t;
}

Tensor Graph::add(Tensor a, Tensor b) {
  check_same_shape(a, b, "add");
  Tensor t = make(Op::kAdd, node(a.id_).shape, {a.id_, b.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  const auto& vb = node(b.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = va[i] + vb[i];
  return t;
}

Tensor Graph::sub(Tensor a, Tensor b) {
  check_same_shape(a, b, "sub");
  Tensor t = make(Op::kSub, node(a.id_).shape, {a.id_, b.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  const auto& vb = node(b.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = va[i] - vb[i];
  return t;
}

Tensor Graph::mul(Tensor a, Tensor b) {
  check_same_shape(a, b, "mul");
  Tensor t = make(Op::kMul, node(a.id_).shape, {a.id_, b.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  const auto& vb = node(b.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = va[i] * vb[i];
  return t;
}

Tensor Graph::div(Tensor a, Tensor b) {
  check_same_shape(a, b, "div");
  Tensor t = make(Op::kDiv, node(a.id_).shape, {a.id_, b.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  const auto& vb = node(b.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = va[i] / vb[i];
  return t;
}

Tensor Graph::minimum(Tensor a, Tensor b) {
  check_same_shape(a, b, "minimum");
  Tensor t = make(Op::kMin, node(a.id_).shape, {a.id_, b.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  const auto& vb = node(b.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) {
    nt.value[i] = va[i] <= vb[i] ? va[i] : vb[i];
  }
  return t;
}

Tensor Graph::maximum(Tensor a, Tensor b) {
  check_same_shape(a, b, "maximum");
  Tensor t = make(Op::kMax, node(a.id_).shape, {a.id_, b.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  const auto& vb = node(b.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) {
    nt.value[i] = va[i] >= vb[i] ? va[i] : vb[i];
  }
  return t;
}

Tensor Graph::add_row(Tensor m, Tensor row) {
  const auto sm = node(m.id_).shape;
  const auto sr = node(row.id_).shape;
  if (sr.rows != 1 || sr.cols != sm.cols) {
    throw std::invalid_argument("add_row: row must be 1 x cols(m)");
  }
  Tensor t = make(Op::kAddRow, sm, {m.id_, row.id_});
  auto& nt = node(t.id_);
  const auto& vm = node(m.id_).value;
  const auto& vr = node(row.id_).value;
  for (int r = 0; r < sm.rows; ++r) {
    for (int c = 0; c < sm.cols; ++c) {
      nt.value[static_cast<std::size_t>(r) * sm.cols + c] =
          vm[static_cast<std::size_t>(r) * sm.cols + c] + vr[c];
    }
  }
  return t;
}

Tensor Graph::scale(Tensor a, double c) {
  Tensor t = make(Op::kScale, node(a.id_).shape, {a.id_});
  auto& nt = node(t.id_);
  nt.aux = {c};
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = va[i] * c;
  return t;
}

Tensor Graph::add_scalar(Tensor a, double c) {
  Tensor t = make(Op::kAddScalar, node(a.id_).shape, {a.id_});
  auto& nt = node(t.id_);
  nt.aux = {c};
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = va[i] + c;
  return t;
}

Tensor Graph::relu(Tensor a) {
  Tensor t = make(Op::kRelu, node(a.id_).shape, {a.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) {
    nt.value[i] = va[i] > 0.0 ? va[i] : 0.0;
  }
  return t;
}

Tensor Graph::sigmoid(Tensor a) {
  Tensor t = make(Op::kSigmoid, node(a.id_).shape, {a.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) {
    const double x = va[i];
    nt.value[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                           : std::exp(x) / (1.0 + std::exp(x));
  }
  return t;
}

Tensor Graph::abs(Tensor a) {
  Tensor t = make(Op::kAbs, node(a.id_).shape, {a.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = std::abs(va[i]);
  return t;
}

Tensor Graph::sin(Tensor a) {
  Tensor t = make(Op::kSin, node(a.id_).shape, {a.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = std::sin(va[i]);
  return t;
}

Tensor Graph::cos(Tensor a) {
  Tensor t = make(Op::kCos, node(a.id_).shape, {a.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < nt.value.size(); ++i) nt.value[i] = std::cos(va[i]);
  return t;
}

Tensor Graph::softmax_rows(Tensor a, const std::vector<std::uint8_t>* keep) {
  const auto sa = node(a.id_).shape;
  if (keep && static_cast<int>(keep->size()) != sa.cols) {
    throw std::invalid_argument("softmax_rows: keep mask size mismatch");
  }
  Tensor t = make(Op::kSoftmaxRows, sa, {a.id_});
  auto& nt = node(t.id_);
  if (keep) nt.mask = *keep;
  const auto& va = node(a.id_).value;
  for (int r = 0; r < sa.rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * sa.cols;
    double mx = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < sa.cols; ++c) {
      if (keep && !(*keep)[c]) continue;
      mx = std::max(mx, va[off + c]);
    }
    if (!std::isfinite(mx)) {
      throw std::invalid_argument("softmax_rows: no kept column");
    }
    double denom = 0.0;
    for (int c = 0; c < sa.cols; ++c) {
      if (keep && !(*keep)[c]) {
        nt.value[off + c] = 0.0;
        continue;
      }
      nt.value[off + c] = std::exp(va[off + c] - mx);
      denom += nt.value[off + c];
    }
    for (int c = 0; c < sa.cols; ++c) nt.value[off + c] /= denom;
  }
  return t;
}

Tensor Graph::layer_norm_rows(Tensor x, Tensor gain, Tensor bias, double eps) {
  const auto sx = node(x.id_).shape;
  const auto sg = node(gain.id_).shape;
  const auto sb = node(bias.id_).shape;
  if (sg.rows != 1 || sg.cols != sx.cols || sb.rows != 1 || sb.cols != sx.cols) {
    throw std::invalid_argument("layer_norm_rows: gain/bias must be 1 x cols");
  }
  Tensor t = make(Op::kLayerNormRows, sx, {x.id_, gain.id_, bias.id_});
  auto& nt = node(t.id_);
  // aux layout: normalized values (rows*cols) then per-row inv_std (rows).
  nt.aux.assign(static_cast<std::size_t>(sx.size()) + sx.rows, 0.0);
  const auto& vx = node(x.id_).value;
  const auto& vg = node(gain.id_).value;
  const auto& vb = node(bias.id_).value;
  for (int r = 0; r < sx.rows; ++r) {
    const std::size_t off = static_cast<std::size_t>(r) * sx.cols;
    double mean = 0.0;
    for (int c = 0; c < sx.cols; ++c) mean += vx[off + c];
    mean /= sx.cols;
    double var = 0.0;
    for (int c = 0; c < sx.cols; ++c) {
      const double d = vx[off + c] - mean;
      var += d * d;
    }
    var /= sx.cols;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    nt.aux[static_cast<std::size_t>(sx.size()) + r] = inv_std;
    for (int c = 0; c < sx.cols; ++c) {
      const double xhat = (vx[off + c] - mean) * inv_std;
      nt.aux[off + c] = xhat;
      nt.value[off + c] = xhat * vg[c] + vb[c];
    }
  }
  return t;
}

Tensor Graph::slice_cols(Tensor a, int c0, int c1) {
  const auto sa = node(a.id_).shape;
  if (c0 < 0 || c1 > sa.cols || c0 >= c1) {
    throw std::invalid_argument("slice_cols: bad column range");
  }
  Tensor t = make(Op::kSliceCols, {sa.rows, c1 - c0}, {a.id_});
  auto& nt = node(t.id_);
  nt.iaux = {c0, c1};
  const auto& va = node(a.id_).value;
  for (int r = 0; r < sa.rows; ++r) {
    for (int c = c0; c < c1; ++c) {
      nt.value[static_cast<std::size_t>(r) * (c1 - c0) + (c - c0)] =
          va[static_cast<std::size_t>(r) * sa.cols + c];
    }
  }
  return t;
}

Tensor Graph::concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  const int rows = node(parts[0].id_).shape.rows;
  int cols = 0;
  std::vector<int> inputs;
  for (const Tensor& p : parts) {
    if (node(p.id_).shape.rows != rows) {
      throw std::invalid_argument("concat_cols: row mismatch");
    }
    cols += node(p.id_).shape.cols;
    inputs.push_back(p.id_);
  }
  Tensor t = make(Op::kConcatCols, {rows, cols}, std::move(inputs));
  auto& nt = node(t.id_);
  int base = 0;
  for (int in : nt.inputs) {
    const auto& np = node(in);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < np.shape.cols; ++c) {
        nt.value[static_cast<std::size_t>(r) * cols + base + c] =
            np.value[static_cast<std::size_t>(r) * np.shape.cols + c];
      }
    }
    base += np.shape.cols;
  }
  return t;
}

Tensor Graph::gather_rows(Tensor a, std::vector<int> rows) {
  const auto sa = node(a.id_).shape;
  for (int r : rows) {
    if (r < 0 || r >= sa.rows) {
      throw std::invalid_argument("gather_rows: index out of range");
    }
  }
  Tensor t =
      make(Op::kGatherRows, {static_cast<int>(rows.size()), sa.cols}, {a.id_});
  auto& nt = node(t.id_);
  const auto& va = node(a.id_).value;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < sa.cols; ++c) {
      nt.value[i * sa.cols + c] =
          va[static_cast<std::size_t>(rows[i]) * sa.cols + c];
    }
  }
  nt.iaux = std::move(rows);
  return t;
}

Tensor Graph::sum(Tensor a) {
  Tensor t = make(Op::kSum, {1, 1}, {a.id_});
  auto& nt = node(t.id_);
  double s = 0.0;
  for (double v : node(a.id_).value) s += v;
  nt.value[0] = s;
  return t;
}

Tensor Graph::mean(Tensor a) {
  Tensor t = make(Op::kMean, {1, 1}, {a.id_});
  auto& nt = node(t.id_);
  double s = 0.0;
  const auto& va = node(a.id_).value;
  for (double v : va) s += v;
  nt.value[0] = s / static_cast<double>(va.size());
  return t;
}

Tensor Graph::l2_norm(Tensor a) {
  const auto sa = node(a.id_).shape;
  if (sa.rows != 1 && sa.cols != 1) {
    throw std::invalid_argument("l2_norm: expects a vector");
  }
  Tensor t = make(Op::kL2Norm, {1, 1}, {a.id_});
  auto& nt = node(t.id_);
  double s = 0.0;
  for (double v : node(a.id_).value) s += v * v;
  nt.value[0] = std::sqrt(s);
  return t;
}

Tensor Graph::bce_with_logits_mean(Tensor logits, std::vector<double> targets) {
  const auto& nl = node(logits.id_);
  if (targets.size() != nl.value.size()) {
    throw std::invalid_argument("bce_with_logits_mean: target size mismatch");
  }
  Tensor t = make(Op::kBceMean, {1, 1}, {logits.id_});
  auto& nt = node(t.id_);
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double x = node(logits.id_).value[i];
    // softplus(x) - x*y, computed stably.
    s += std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))) -
         x * targets[i];
  }
  nt.value[0] = s / static_cast<double>(targets.size());
  nt.aux = std::move(targets);
  return t;
}

void Graph::backward(Tensor root) {
  if (root.graph_ != this) throw std::logic_error("backward: foreign tensor");
  if (node(root.id_).shape.size() != 1) {
    throw std::logic_error("backward: root must be scalar");
  }
  for (auto& n : nodes_) n.grad.assign(n.value.size(), 0.0);
  node(root.id_).grad[0] = 1.0;
  for (int id = root.id_; id >= 0; --id) backward_node(id);
}

void Graph::backward_node(int id) {
  Node& n = nodes_[id];
  bool all_zero = true;
  for (double g : n.grad) {
    if (g != 0.0) {
      all_zero = false;
      break;
    }
  }
  if (all_zero) return;

  auto& g = n.grad;
  switch (n.op) {
    case Op::kConstant:
      break;
    case Op::kInput: {
      for (std::size_t i = 0; i < g.size(); ++i) n.param->grad[i] += g[i];
      break;
    }
    case Op::kMatMul: {
      Node& a = nodes_[n.inputs[0]];
      Node& b = nodes_[n.inputs[1]];
      map(a.grad, a.shape).noalias() +=
          map(g, n.shape) * map(b.value, b.shape).transpose();
      map(b.grad, b.shape).noalias() +=
          map(a.value, a.shape).transpose() * map(g, n.shape);
      break;
    }
    case Op::kTranspose: {
      Node& a = nodes_[n.inputs[0]];
      map(a.grad, a.shape) += map(g, n.shape).transpose();
      break;
    }
    case Op::kAdd: {
      Node& a = nodes_[n.inputs[0]];
      Node& b = nodes_[n.inputs[1]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i];
        b.grad[i] += g[i];
      }
      break;
    }
    case Op::kSub: {
      Node& a = nodes_[n.inputs[0]];
      Node& b = nodes_[n.inputs[1]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i];
        b.grad[i] -= g[i];
      }
      break;
    }
    case Op::kMul: {
      Node& a = nodes_[n.inputs[0]];
      Node& b = nodes_[n.inputs[1]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i] * b.value[i];
        b.grad[i] += g[i] * a.value[i];
      }
      break;
    }
    case Op::kDiv: {
      Node& a = nodes_[n.inputs[0]];
      Node& b = nodes_[n.inputs[1]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i] / b.value[i];
        b.grad[i] -= g[i] * a.value[i] / (b.value[i] * b.value[i]);
      }
      break;
    }
    case Op::kMin: {
      Node& a = nodes_[n.inputs[0]];
      Node& b = nodes_[n.inputs[1]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.value[i] <= b.value[i]) {
          a.grad[i] += g[i];
        } else {
          b.grad[i] += g[i];
        }
      }
      break;
    }
    case Op::kMax: {
      Node& a = nodes_[n.inputs[0]];
      Node& b = nodes_[n.inputs[1]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.value[i] >= b.value[i]) {
          a.grad[i] += g[i];
        } else {
          b.grad[i] += g[i];
        }
      }
      break;
    }
    case Op::kAddRow: {
      Node& m = nodes_[n.inputs[0]];
      Node& row = nodes_[n.inputs[1]];
      for (int r = 0; r < n.shape.rows; ++r) {
        for (int c = 0; c < n.shape.cols; ++c) {
          const double gv = g[static_cast<std::size_t>(r) * n.shape.cols + c];
          m.grad[static_cast<std::size_t>(r) * n.shape.cols + c] += gv;
          row.grad[c] += gv;
        }
      }
      break;
    }
    case Op::kScale: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * n.aux[0];
      break;
    }
    case Op::kAddScalar: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
      break;
    }
    case Op::kRelu: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.value[i] > 0.0) a.grad[i] += g[i];
      }
      break;
    }
    case Op::kSigmoid: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      }
      break;
    }
    case Op::kAbs: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.value[i] > 0.0) {
          a.grad[i] += g[i];
        } else if (a.value[i] < 0.0) {
          a.grad[i] -= g[i];
        }
      }
      break;
    }
    case Op::kSin: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] += g[i] * std::cos(a.value[i]);
      }
      break;
    }
    case Op::kCos: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < g.size(); ++i) {
        a.grad[i] -= g[i] * std::sin(a.value[i]);
      }
      break;
    }
    case Op::kSoftmaxRows: {
      Node& a = nodes_[n.inputs[0]];
      for (int r = 0; r < n.shape.rows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * n.shape.cols;
        double dot = 0.0;
        for (int c = 0; c < n.shape.cols; ++c) {
          dot += g[off + c] * n.value[off + c];
        }
        for (int c = 0; c < n.shape.cols; ++c) {
          a.grad[off + c] += n.value[off + c] * (g[off + c] - dot);
        }
      }
      break;
    }
    case Op::kLayerNormRows: {
      Node& x = nodes_[n.inputs[0]];
      Node& gain = nodes_[n.inputs[1]];
      Node& bias = nodes_[n.inputs[2]];
      const int cols = n.shape.cols;
      for (int r = 0; r < n.shape.rows; ++r) {
        const std::size_t off = static_cast<std::size_t>(r) * cols;
        const double inv_std =
            n.aux[static_cast<std::size_t>(n.shape.size()) + r];
        double mean_dxhat = 0.0;
        double mean_dxhat_xhat = 0.0;
        for (int c = 0; c < cols; ++c) {
          const double dy = g[off + c];
          const double xhat = n.aux[off + c];
          bias.grad[c] += dy;
          gain.grad[c] += dy * xhat;
          const double dxhat = dy * gain.value[c];
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * xhat;
        }
        mean_dxhat /= cols;
        mean_dxhat_xhat /= cols;
        for (int c = 0; c < cols; ++c) {
          const double dxhat = g[off + c] * gain.value[c];
          const double xhat = n.aux[off + c];
          x.grad[off + c] +=
              inv_std * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
      }
      break;
    }
    case Op::kSliceCols: {
      Node& a = nodes_[n.inputs[0]];
      const int c0 = n.iaux[0];
      const int c1 = n.iaux[1];
      for (int r = 0; r < n.shape.rows; ++r) {
        for (int c = c0; c < c1; ++c) {
          a.grad[static_cast<std::size_t>(r) * a.shape.cols + c] +=
              g[static_cast<std::size_t>(r) * (c1 - c0) + (c - c0)];
        }
      }
      break;
    }
    case Op::kConcatCols: {
      int base = 0;
      for (int in : n.inputs) {
        Node& p = nodes_[in];
        for (int r = 0; r < n.shape.rows; ++r) {
          for (int c = 0; c < p.shape.cols; ++c) {
            p.grad[static_cast<std::size_t>(r) * p.shape.cols + c] +=
                g[static_cast<std::size_t>(r) * n.shape.cols + base + c];
          }
        }
        base += p.shape.cols;
      }
      break;
    }
    case Op::kGatherRows: {
      Node& a = nodes_[n.inputs[0]];
      for (std::size_t i = 0; i < n.iaux.size(); ++i) {
        for (int c = 0; c < n.shape.cols; ++c) {
          a.grad[static_cast<std::size_t>(n.iaux[i]) * a.shape.cols + c] +=
              g[i * n.shape.cols + c];
        }
      }
      break;
    }
    case Op::kSum: {
      Node& a = nodes_[n.inputs[0]];
      for (double& ag : a.grad) ag += g[0];
      break;
    }
    case Op::kMean: {
      Node& a = nodes_[n.inputs[0]];
      const double gv = g[0] / static_cast<double>(a.value.size());
      for (double& ag : a.grad) ag += gv;
      break;
    }
    case Op::kL2Norm: {
      Node& a = nodes_[n.inputs[0]];
      const double norm = n.value[0];
      if (norm > 0.0) {
        for (std::size_t i = 0; i < a.value.size(); ++i) {
          a.grad[i] += g[0] * a.value[i] / norm;
        }
      }
      break;
    }
    case Op::kBceMean: {
      Node& a = nodes_[n.inputs[0]];
      const double inv_n = 1.0 / static_cast<double>(a.value.size());
      for (std::size_t i = 0; i < a.value.size(); ++i) {
        const double x = a.value[i];
        const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                  : std::exp(x) / (1.0 + std::exp(x));
        a.grad[i] += g[0] * (s - n.aux[i]) * inv_n;
      }
      break;
    }
  }
}

}  // namespace refprompt::nn
