// Copyright 2026 The rateval Authors.
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

#ifndef RATEVAL_TOKENIZER_H_
#define RATEVAL_TOKENIZER_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rateval {

using TokenId = int32_t;
using TokenSeq = std::vector<TokenId>;

// Lowercases ASCII, splits on whitespace and isolates every ASCII punctuation
// character as its own token. Bytes >= 0x80 are treated as word characters.
std::vector<std::string> Segment(std::string_view text);

// Inverse of Segment up to normalization: tokens joined by single spaces.
std::string JoinTokens(std::span<const std::string> tokens);

// Token <-> id mapping. Ids [0, reserved_count()) are reserved:
//   PAD, UNK, SEP, sentinels S0..S(k-1), then one token per fixed label.
// Corpus tokens follow in frequency-descending, then lexicographic order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kSep = 2;
  static constexpr TokenId kFirstSentinel = 3;

  Vocabulary() : Vocabulary(8, {}) {}
  // `labels` are fixed-mode label strings; they are segmented and must each
  // normalize to a single token.
  Vocabulary(int num_sentinels, const std::vector<std::string>& labels);

  // Unknown tokens map to UNK.
  TokenSeq Encode(std::string_view text) const;
  // Building mode: unseen tokens get fresh ids.
  TokenSeq EncodeGrowing(std::string_view text);
  std::string Decode(std::span<const TokenId> ids) const;

  // Adds `token` if absent; returns its id.
  TokenId Add(const std::string& token);
  // UNK when absent.
  TokenId Lookup(std::string_view token) const;
  bool Contains(std::string_view token) const;
  const std::string& Token(TokenId id) const;

  TokenId Sentinel(int i) const;
  bool IsSentinel(TokenId id) const {
    return id >= kFirstSentinel && id < kFirstSentinel + num_sentinels_;
  }
  int num_sentinels() const { return num_sentinels_; }
  // Id of the reserved token for fixed label `index`.
  TokenId LabelToken(int index) const;
  int num_labels() const { return static_cast<int>(label_ids_.size()); }

  int size() const { return static_cast<int>(id_to_token_.size()); }
  int reserved_count() const { return reserved_count_; }

 private:
  int num_sentinels_;
  int reserved_count_ = 0;
  std::vector<TokenId> label_ids_;
  std::map<std::string, TokenId, std::less<>> token_to_id_;
  std::vector<std::string> id_to_token_;
};

}  // namespace rateval

#endif  // RATEVAL_TOKENIZER_H_
