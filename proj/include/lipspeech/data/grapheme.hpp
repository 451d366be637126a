// lipspeech/data/grapheme.hpp

// Copyright 2026  The lipspeech authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "lipspeech/core/common.hpp"

namespace lipspeech {

// Grapheme inventory: id 0 is the CTC blank, ids 1..26 are 'a'..'z',
// id 27 is the space. V = 28.
namespace grapheme {

constexpr index_t kBlankId = 0;
constexpr index_t kSpaceId = 27;
constexpr index_t kVocabSize = 28;

inline bool is_valid_char(char c) { return (c >= 'a' && c <= 'z') || c == ' '; }

inline index_t char_to_id(char c) {
  require<CorpusError>(is_valid_char(c), "grapheme: character '", std::string(1, c),
                       "' outside alphabet [a-z ]");
  return c == ' ' ? kSpaceId : index_t(c - 'a' + 1);
}

inline char id_to_char(index_t id) {
  require<CorpusError>(id >= 1 && id < kVocabSize, "grapheme: id ", id,
                       " outside [1,", kVocabSize - 1, "]");
  return id == kSpaceId ? ' ' : char('a' + (id - 1));
}

}  // namespace grapheme

using GraphemeIds = std::vector<index_t>;

inline GraphemeIds encode_transcript(const std::string& text) {
  require<CorpusError>(!text.empty(), "encode_transcript: empty transcript");
  GraphemeIds ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(grapheme::char_to_id(c));
  return ids;
}

inline std::string decode_graphemes(const GraphemeIds& ids) {
  std::string out;
  out.reserve(ids.size());
  for (index_t id : ids) out.push_back(grapheme::id_to_char(id));
  return out;
}

}  // namespace lipspeech
