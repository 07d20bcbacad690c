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

#include "rateval/tokenizer.h"

#include <array>
#include <cctype>
#include <stdexcept>

#include "rateval/errors.h"

namespace rateval {
namespace {

constexpr std::array<const char*, 3> kReservedSpellings = {"<pad>", "<unk>", "<sep>"};

bool IsSpace(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }

bool IsPunct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

// Length of a reserved spelling ("<pad>", "<s12>", ...) starting at `pos`,
// or 0. Such tokens survive segmentation intact so decoded text re-encodes.
size_t ReservedAt(std::string_view text, size_t pos) {
  if (text[pos] != '<') return 0;
  for (const char* r : kReservedSpellings) {
    const std::string_view rv(r);
    if (text.substr(pos, rv.size()) == rv) return rv.size();
  }
  if (pos + 2 < text.size() && text[pos + 1] == 's') {
    size_t end = pos + 2;
    while (end < text.size() && std::isdigit(static_cast<unsigned char>(text[end]))) ++end;
    if (end > pos + 2 && end < text.size() && text[end] == '>') return end + 1 - pos;
  }
  return 0;
}

std::string SentinelSpelling(int i) { return "<s" + std::to_string(i) + ">"; }

}  // namespace

std::vector<std::string> Segment(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (size_t i = 0; i < text.size();) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (IsSpace(c)) {
      flush();
      ++i;
    } else if (const size_t n = ReservedAt(text, i); n > 0) {
      flush();
      out.emplace_back(text.substr(i, n));
      i += n;
    } else if (IsPunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
      ++i;
    } else {
      word.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
      ++i;
    }
  }
  flush();
  return out;
}

std::string JoinTokens(std::span<const std::string> tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary(int num_sentinels, const std::vector<std::string>& labels)
    : num_sentinels_(num_sentinels) {
  if (num_sentinels < 0) throw ConfigError("num_sentinels must be >= 0");
  for (const char* r : kReservedSpellings) Add(r);
  for (int i = 0; i < num_sentinels; ++i) Add(SentinelSpelling(i));
  for (const std::string& label : labels) {
    const std::vector<std::string> parts = Segment(label);
    if (parts.size() != 1) {
      throw ConfigError("fixed label '" + label + "' must normalize to one token");
    }
    if (Contains(parts[0])) throw ConfigError("duplicate fixed label '" + label + "'");
    label_ids_.push_back(Add(parts[0]));
  }
  reserved_count_ = size();
}

TokenSeq Vocabulary::Encode(std::string_view text) const {
  TokenSeq ids;
  for (const std::string& tok : Segment(text)) ids.push_back(Lookup(tok));
  return ids;
}

TokenSeq Vocabulary::EncodeGrowing(std::string_view text) {
  TokenSeq ids;
  for (const std::string& tok : Segment(text)) ids.push_back(Add(tok));
  return ids;
}

std::string Vocabulary::Decode(std::span<const TokenId> ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += Token(ids[i]);
  }
  return out;
}

TokenId Vocabulary::Add(const std::string& token) {
  auto it = token_to_id_.find(token);
  if (it != token_to_id_.end()) return it->second;
  const TokenId id = static_cast<TokenId>(id_to_token_.size());
  token_to_id_.emplace(token, id);
  id_to_token_.push_back(token);
  return id;
}

TokenId Vocabulary::Lookup(std::string_view token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::Contains(std::string_view token) const {
  return token_to_id_.find(token) != token_to_id_.end();
}

const std::string& Vocabulary::Token(TokenId id) const {
  if (id < 0 || id >= size()) throw DataError("token id out of range: " + std::to_string(id));
  return id_to_token_[static_cast<size_t>(id)];
}

TokenId Vocabulary::Sentinel(int i) const {
  if (i < 0 || i >= num_sentinels_) {
    throw DataError("sentinel index out of range: " + std::to_string(i));
  }
  return kFirstSentinel + i;
}

TokenId Vocabulary::LabelToken(int index) const {
  if (index < 0 || index >= num_labels()) {
    throw DataError("label index out of range: " + std::to_string(index));
  }
  return label_ids_[static_cast<size_t>(index)];
}

}  // namespace rateval
