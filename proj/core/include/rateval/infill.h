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

#ifndef RATEVAL_INFILL_H_
#define RATEVAL_INFILL_H_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rateval/attribution.h"
#include "rateval/corpus.h"

namespace rateval {

struct SpanTarget {
  TokenId sentinel = 0;
  TokenSeq span;
  // Nearest unmasked neighbours in the rationale (kBoundary at the edges).
  TokenId left = 0;
  TokenId right = 0;
};

struct MaskedExample {
  std::string id;
  // Label tokens e (the fixed label token, or the target choice's tokens).
  TokenSeq label_tokens;
  // e ++ question ++ rationale with one sentinel per masked span.
  TokenSeq conditioning;
  std::vector<SpanTarget> targets;
};

struct MaskedCorpus {
  std::vector<MaskedExample> examples;
  std::vector<std::string> passthrough_ids;
};

// Marks a context position outside the rationale.
inline constexpr TokenId kBoundary = -1;

// Label tokens for instance `i` under label value `e`.
TokenSeq LabelTokens(const Dataset& dataset, size_t i, int e, const Vocabulary& vocab);

MaskedCorpus BuildMaskedExamples(const Dataset& dataset, const std::string& variant,
                                 const LeakSelection& masks, const Vocabulary& vocab);

struct InfillerConfig {
  double alpha = 0.1;
  int max_span = 8;
  uint64_t seed = 0;
};

// Smoothed categorical span model keyed by (label key, left, right) with
// back-off to the label key alone, then to the unconditioned distribution.
// Span tokens that copy the conditioning label tokens are stored as copy
// slots so a span learned under one label decodes under another.
class Infiller {
 public:
  using SpanCode = std::vector<int64_t>;

  Infiller() = default;
  explicit Infiller(const InfillerConfig& config) : config_(config) {}

  void Observe(const TokenSeq& label_tokens, const SpanTarget& target);

  // Greedy decode; ties go to the lexicographically smallest candidate.
  TokenSeq Decode(const TokenSeq& label_tokens, TokenId left, TokenId right) const;
  // Smoothed probability of `span` in the most specific seen context.
  double Probability(const TokenSeq& label_tokens, TokenId left, TokenId right,
                     const TokenSeq& span) const;

  const InfillerConfig& config() const { return config_; }
  size_t num_candidates() const { return candidates_.size(); }
  // Stable identifier over the fitted counts.
  std::string Fingerprint() const;

 private:
  using ContextKey = std::vector<int64_t>;

  SpanCode EncodeSpan(const TokenSeq& label_tokens, const TokenSeq& span) const;
  TokenSeq DecodeSpan(const TokenSeq& label_tokens, const SpanCode& code) const;
  const std::map<SpanCode, double>* Lookup(const TokenSeq& label_tokens, TokenId left,
                                           TokenId right) const;

  InfillerConfig config_;
  std::map<ContextKey, std::map<SpanCode, double>> counts_;
  std::map<SpanCode, double> candidates_;
};

// Throws ConfigError when `examples` is empty.
Infiller TrainInfiller(const std::vector<MaskedExample>& examples,
                       const InfillerConfig& config);

struct Environment {
  // Fixed mode: label index; open-label mode: choice index.
  int label_value = 0;
  std::string label_text;
  Dataset data;
};

// D^e: each masked span of `variant` replaced by the infiller's decode under
// e; unmasked tokens and labels kept. With `reuse_original`, instances whose
// own label is e keep their original rationale.
Environment GenerateCounterfactuals(const Dataset& dataset, const std::string& variant,
                                    const LeakSelection& masks, const Infiller& infiller,
                                    int e, const Vocabulary& vocab,
                                    bool reuse_original = false);

// One environment per label value (fixed mode) or per choice slot (open
// mode, where every instance has the same number of choices).
std::vector<Environment> GenerateEnvironments(const Dataset& dataset,
                                              const std::string& variant,
                                              const LeakSelection& masks,
                                              const Infiller& infiller,
                                              const Vocabulary& vocab,
                                              bool reuse_original = false);

}  // namespace rateval

#endif  // RATEVAL_INFILL_H_
