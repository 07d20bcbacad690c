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

#ifndef RATEVAL_CORPUS_H_
#define RATEVAL_CORPUS_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "rateval/tokenizer.h"

namespace rateval {

enum class VariantKind { kGold, kLeaky, kGoldLeaky, kVacuous, kDistractor, kCustom };

VariantKind VariantKindFromName(std::string_view name);
std::string_view VariantKindName(VariantKind kind);

struct RationaleText {
  std::string text;
  // Empty is the null rationale.
  TokenSeq tokens;
  VariantKind kind = VariantKind::kCustom;
};

struct Choice {
  std::string text;
  TokenSeq tokens;
};

struct Instance {
  std::string id;
  std::string question;
  TokenSeq question_tokens;
  // Present only in open-label (per-instance) mode.
  std::optional<std::vector<Choice>> choices;
  // Index into the fixed label list, or into `choices`.
  int label = 0;
  std::map<std::string, RationaleText> rationales;

  // Null rationale when the variant is absent.
  const TokenSeq& RationaleTokens(const std::string& variant) const;
};

enum class LabelMode { kFixed, kPerInstance };

struct LabelSpace {
  LabelMode mode = LabelMode::kFixed;
  // Fixed mode only; ordered.
  std::vector<std::string> labels;

  int Find(std::string_view label) const;
};

enum class SplitTag { kTrain, kVal, kTest };
std::string_view SplitTagName(SplitTag tag);

struct Dataset {
  std::vector<Instance> instances;
  LabelSpace label_space;
  SplitTag split = SplitTag::kTrain;
  // Free-form key/value header (environment files carry one).
  std::map<std::string, std::string> provenance;

  size_t size() const { return instances.size(); }
  // Number of labels available to instance `i`.
  int NumLabels(size_t i) const;
  // Surface string of label `label` for instance `i`.
  const std::string& LabelText(size_t i, int label) const;
};

// Throws DataError on duplicate ids, out-of-range labels, mode mismatch or
// empty questions.
void Validate(const Dataset& dataset);

// Vocabulary over all text in `datasets` (questions, choices, rationales).
// Reserved tokens are always present; fixed labels come from the first
// dataset's label space. Throws ConfigError when `datasets` is empty or
// min_count < 1.
Vocabulary BuildVocab(const std::vector<const Dataset*>& datasets, int min_count,
                      int num_sentinels = 8);

// Fills every token field from the text fields.
void EncodeDataset(Dataset& dataset, const Vocabulary& vocab);

// JSONL: {"id", "question", "choices": [str] | null, "label", "rationales"}.
// A first line holding only {"provenance": {...}} is accepted. When
// `fixed_labels` is null the label list is inferred (sorted). Throws DataError
// with the offending line number or instance id.
Dataset LoadJsonl(const std::string& path,
                  const std::vector<std::string>* fixed_labels = nullptr);
Dataset ParseJsonl(std::string_view contents,
                   const std::vector<std::string>* fixed_labels = nullptr);
std::string SerializeJsonl(const Dataset& dataset);
void SaveJsonl(const Dataset& dataset, const std::string& path);

// "{label}" in `templ` is replaced with `label`. Throws ConfigError unless the
// placeholder occurs exactly once.
RationaleText MakeLeaky(std::string_view label, std::string_view templ);

// Gold followed by leaky with a single space; tokens concatenate.
RationaleText MakeGoldLeaky(const RationaleText& gold, const RationaleText& leaky);

// Declarative restatement. Supported slots: {label} (lowercased),
// {question} (question text without its trailing '?'), and any key of
// `slots`.
RationaleText MakeVacuous(std::string_view question, std::string_view label,
                          std::string_view declarative_template,
                          const std::map<std::string, std::string>& slots = {});

struct SplitResult {
  Dataset train, val, test;
};

// Stratified by label; deterministic under `seed`. Throws ConfigError when
// the ratios do not sum to 1 and DataError when a label group cannot cover
// every split with a positive ratio.
SplitResult Split(const Dataset& dataset, std::array<double, 3> ratios, uint64_t seed);

}  // namespace rateval

#endif  // RATEVAL_CORPUS_H_
