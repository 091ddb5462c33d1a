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

#include "refprompt/vocab.hpp"

#include <sstream>
#include <stdexcept>

namespace refprompt::data {

Vocabulary::Vocabulary()
    : words_{"<pad>",          "<bos>",
             "<eos>",          "the",
             "red",            "green",
             "blue",           "yellow",
             "circle",         "square",
             "triangle",       "moving",
             "staying",        "still",
             "left",           "right",
             "up",             "down",
             "toward-top-right", "toward-bottom-left"} {}

int Vocabulary::id(std::string_view word) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (words_[i] == word) return static_cast<int>(i);
  }
  throw std::invalid_argument("unknown word: \"" + std::string(word) + "\"");
}

bool Vocabulary::contains(std::string_view word) const {
  for (const auto& w : words_) {
    if (w == word) return true;
  }
  return false;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) {
    throw std::out_of_range("token id out of range: " + std::to_string(id));
  }
  return words_[id];
}

std::vector<int> Vocabulary::tokenize(std::string_view sentence) const {
  std::vector<int> ids;
  ids.reserve(kMaxLen);
  ids.push_back(kBosId);
  std::istringstream ss{std::string(sentence)};
  std::string word;
  while (ss >> word) {
    if (static_cast<int>(ids.size()) == kMaxLen - 1) break;  // room for EOS
    ids.push_back(id(word));
  }
  ids.push_back(kEosId);
  ids.resize(kMaxLen, kPadId);
  return ids;
}

}  // namespace refprompt::data
