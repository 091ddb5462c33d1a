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

#ifndef REFPROMPT_RNG_HPP
#define REFPROMPT_RNG_HPP

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace refprompt {

/// Deterministic random source. All sampling transforms are implemented here
/// (not delegated to std distributions, whose output is implementation
/// defined), so a seed pins the exact byte stream of everything derived
/// from it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
  int uniform_int(int n);

  /// Standard normal via Box-Muller. Computes a fresh pair per call and
  /// discards the second value, keeping the engine the only state.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::string save_state() const;
  void restore_state(const std::string& state);

  /// Mixes a seed with a textual stream tag into a new seed. Used to give
  /// every component (data, init, sampler, ...) an independent stream.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag);
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag,
                              std::uint64_t index);

 private:
  std::mt19937_64 engine_;
};

}  // namespace refprompt

#endif  // REFPROMPT_RNG_HPP
