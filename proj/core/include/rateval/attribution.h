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

#ifndef RATEVAL_ATTRIBUTION_H_
#define RATEVAL_ATTRIBUTION_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rateval/corpus.h"
#include "rateval/model.h"
#include "rateval/training.h"

namespace rateval {

struct TokenAttribution {
  TokenId token = 0;
  int position = 0;
  // Logit units.
  double score = 0;
};

struct AttributionMap {
  std::string id;
  std::vector<TokenAttribution> tokens;  // one per rationale position
  int target = 0;
  int steps = 0;
  // f(x) - f(x0), x0 = zero rationale rows.
  double output_delta = 0;
  // sum(scores) - output_delta.
  double residual = 0;
};

// Integrated gradients of the target logit along the straight path from zero
// rationale embeddings to the actual ones, midpoint Riemann sum with `steps`
// points. Non-rationale rows stay fixed. Bigram rows split their score evenly
// between the rationale positions they cover. Throws ConfigError for
// steps < 1 and DataError for out-of-vocabulary tokens.
AttributionMap IntegratedGradients(const Model& model, const View& view, int target,
                                   int steps);

struct AttributionStat {
  double mean = 0;
  int64_t count = 0;
};

// Per token type, averaged over occurrences.
struct GlobalAttribution {
  std::map<TokenId, AttributionStat> overall;
  // Same statistic restricted to instances whose target label key matches.
  std::map<TokenId, std::map<TokenId, AttributionStat>> by_label;
};

// `label_keys[i]` groups maps[i]: the label token in fixed mode, the first
// token of the target choice in open-label mode.
GlobalAttribution AggregateGlobal(const std::vector<AttributionMap>& maps,
                                  const std::vector<TokenId>& label_keys);

struct SelectionRule {
  enum class Kind { kThreshold, kTopK };
  Kind kind = Kind::kTopK;
  double threshold = 0.01;
  int top_k = 1;
  // Rank by |mean| instead of the signed mean.
  bool absolute = false;
  // Top-k only considers types whose ranked score exceeds this floor.
  double min_score = 0.005;

  std::string Describe() const;
};

struct MaskSpan {
  int start = 0;
  int length = 0;
  bool operator==(const MaskSpan&) const = default;
};

struct LeakMask {
  std::string id;
  std::vector<bool> selected;  // one per rationale token
  std::vector<MaskSpan> spans;  // maximal runs of selected tokens

  bool empty() const { return spans.empty(); }
};

struct LeakSelection {
  SelectionRule rule;
  std::set<TokenId> types;
  std::vector<LeakMask> masks;  // aligned with the dataset's instances
};

// Maximal runs of true flags.
std::vector<MaskSpan> MergeRuns(const std::vector<bool>& flags);

// Threshold: types whose overall mean exceeds tau. Top-k: within each label
// group, the k highest-ranked types; the union is selected. Every occurrence
// of a selected type inside the rationale is masked. Throws ConfigError for
// tau <= 0 or k < 1.
std::set<TokenId> SelectTypes(const GlobalAttribution& global, const SelectionRule& rule);
LeakSelection SelectLeaks(const GlobalAttribution& global, const SelectionRule& rule,
                          const Dataset& dataset, const std::string& variant);

// Label-key token for instance `i` (see AggregateGlobal).
TokenId LabelKey(const Dataset& dataset, size_t i, const Vocabulary& vocab);

struct DetectionResult {
  TrainedPredictor small_model;
  std::vector<AttributionMap> maps;
  GlobalAttribution global;
  LeakSelection selection;
};

struct DetectionConfig {
  FamilyConfig family{Architecture::kEmbeddingBag, 16, 1, 4096};
  TrainConfig train;
  int ig_steps = 64;
  SelectionRule rule;
};

DetectionConfig DefaultDetectionConfig();

// Trains the rationale-only small model on `train`, attributes every
// instance of `train` to its gold label, aggregates and selects.
DetectionResult DetectLeaks(const Dataset& train, const Dataset& val,
                            const std::string& variant, const Vocabulary& vocab,
                            const DetectionConfig& config);

// Masks for another dataset under an already selected type set.
LeakSelection ApplySelection(const LeakSelection& selection, const Dataset& dataset,
                             const std::string& variant);

// JSONL {"id", "tokens", "scores", "residual"}.
std::string AttributionDumpJsonl(const std::vector<AttributionMap>& maps,
                                 const Vocabulary& vocab);
// TSV: token, mean, count; sorted by mean descending then token.
std::string GlobalAttributionTsv(const GlobalAttribution& global, const Vocabulary& vocab);

}  // namespace rateval

#endif  // RATEVAL_ATTRIBUTION_H_
