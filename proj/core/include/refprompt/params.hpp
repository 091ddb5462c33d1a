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

#ifndef REFPROMPT_PARAMS_HPP
#define REFPROMPT_PARAMS_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "refprompt/rng.hpp"

namespace refprompt::nn {

struct TensorShape {
  int rows = 0;
  int cols = 0;

  int size() const { return rows * cols; }
  bool operator==(const TensorShape&) const = default;
};

/// Named parameter array. Frozen parameters never receive gradients and are
/// excluded from every optimizer; they still live in the store so checkpoints
/// capture the complete model state.
struct Parameter {
  std::string name;
  TensorShape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;
};

class ParameterStore {
 public:
  Parameter& create(std::string name, TensorShape shape, bool trainable);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  /// Deterministic iteration order (lexicographic by name).
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<Parameter*> trainable();

  void zero_grads();
  std::size_t size() const { return params_.size(); }

 private:
  std::map<std::string, std::unique_ptr<Parameter>, std::less<>> params_;
};

// Seeded initializers. The per-parameter stream is derived from
// (seed, parameter name) so init is independent of registration order.
void init_zeros(Parameter& p);
void init_normal(Parameter& p, std::uint64_t seed, double stddev);
void init_xavier_uniform(Parameter& p, std::uint64_t seed, double gain = 1.0);

}  // namespace refprompt::nn

#endif  // REFPROMPT_PARAMS_HPP
