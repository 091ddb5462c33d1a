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

#ifndef REFPROMPT_VOCAB_HPP_
#define REFPROMPT_VOCAB_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace refprompt::data {

/// Fixed closed vocabulary for the templated referring grammar
///   "the <color> <shape> moving <motion>"  |  "the <color> <shape> staying still"
/// Token ids are stable across builds; id 0/1/2 are PAD/BOS/EOS.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kBosId = 1;
  static constexpr int kEosId = 2;
  static constexpr int kMaxLen = 12;  // fixed tokenized sequence length

  Vocabulary();

  int size() const { return static_cast<int>(words_.size()); }

  /// Id for a word; throws std::invalid_argument naming the word if absent.
  int id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(int id) const;  // throws std::out_of_range

  /// Whitespace-split, map to ids, wrap in BOS/EOS, pad/truncate to kMaxLen.
  /// Truncation drops trailing words so BOS/EOS always fit.
  std::vector<int> tokenize(std::string_view sentence) const;

 private:
  std::vector<std::string> words_;
};

}  // namespace refprompt::data

#endif  // REFPROMPT_VOCAB_HPP_
