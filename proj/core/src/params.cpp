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

#include "refprompt/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace refprompt::nn {

Parameter& ParameterStore::create(std::string name, TensorShape shape,
                                  bool trainable) {
  if (params_.contains(name)) {
    throw std::invalid_argument("ParameterStore: duplicate name " + name);
  }
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->shape = shape;
  p->value.assign(shape.size(), 0.0);
  p->grad.assign(shape.size(), 0.0);
  p->trainable = trainable;
  auto [it, _] = params_.emplace(std::move(name), std::move(p));
  return *it->second;
}

Parameter& ParameterStore::at(std::string_view name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw std::out_of_range("ParameterStore: unknown name " +
                            std::string(name));
  }
  return *it->second;
}

const Parameter& ParameterStore::at(std::string_view name) const {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw std::out_of_range("ParameterStore: unknown name " +
                            std::string(name));
  }
  return *it->second;
}

bool ParameterStore::contains(std::string_view name) const {
  return params_.contains(name);
}

std::vector<Parameter*> ParameterStore::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParameterStore::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (const auto& [_, p] : params_) out.push_back(p.get());
  return out;
}

std::vector<Parameter*> ParameterStore::trainable() {
  std::vector<Parameter*> out;
  for (auto& [_, p] : params_) {
    if (p->trainable) out.push_back(p.get());
  }
  return out;
}

void ParameterStore::zero_grads() {
  for (auto& [_, p] : params_) {
    std::fill(p->grad.begin(), p->grad.end(), 0.0);
  }
}

void init_zeros(Parameter& p) {
  std::fill(p.value.begin(), p.value.end(), 0.0);
}

void init_normal(Parameter& p, std::uint64_t seed, double stddev) {
  Rng rng(Rng::derive(seed, p.name));
  for (double& v : p.value) v = rng.normal(0.0, stddev);
}

void init_xavier_uniform(Parameter& p, std::uint64_t seed, double gain) {
  Rng rng(Rng::derive(seed, p.name));
  const double fan_in = p.shape.rows;
  const double fan_out = p.shape.cols;
  const double a = gain * std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : p.value) v = rng.uniform(-a, a);
}

}  // namespace refprompt::nn
