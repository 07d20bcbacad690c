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

#ifndef RATEVAL_SCORING_H_
#define RATEVAL_SCORING_H_

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rateval/corpus.h"
#include "rateval/training.h"
#include "rateval/views.h"

namespace rateval {

enum class MetricKind {
  kInvariant,  // leak-robust conditional information of the rationale
  kAblation,   // conditional information with a plainly trained evaluator
  kRev,
  kLas,
  kRq,
};

std::string MetricName(MetricKind kind);
MetricKind MetricFromName(const std::string& name);

struct Interval {
  double lo = 0;
  double hi = 0;
};

struct ScoreReport {
  MetricKind metric = MetricKind::kInvariant;
  std::string variant;
  // NaN when undefined (LAS with an empty group).
  double mean = 0;
  std::vector<double> pointwise;
  Interval ci;
  size_t n = 0;
  std::string units;
  std::string fingerprint;
  std::map<std::string, double> details;
};

struct EntropyEstimate {
  Conditioning conditioning;
  double nats = 0;
  std::string model_id;
};

// Mean -ln p(y | view) with inputs outside `conditioning` fed as null.
EntropyEstimate EstimateEntropy(const TrainedPredictor& model, const Dataset& data,
                                const Conditioning& conditioning,
                                const std::string& variant,
                                const std::string& model_id = "");

// Percentile 2.5 / 97.5 interval of resampled means.
Interval BootstrapCi(std::span<const double> pointwise, int resamples, uint64_t seed);

struct ScoringConfig {
  FamilyConfig family;
  TrainConfig train;
  int bootstrap_resamples = 1000;
  uint64_t seed = 0;
  // Report information metrics in bits.
  bool bits = false;
  // LAS counts an instance as leaked when the rationale-only simulator gives
  // the gold label probability >= 1/|Y| + margin.
  double las_margin = 0.25;
  std::string fingerprint;
};

// Pointwise ln p_phi(y | x, r) - ln p_theta(y | x, null), averaged over test.
// Throws DataError when the two models disagree on the label space.
ScoreReport InvariantScore(const TrainedPredictor& phi, const TrainedPredictor& theta,
                           const Dataset& test, const std::string& variant,
                           const ScoringConfig& config);

// Baseline metrics sharing one question-only baseline and the evaluator
// family. Models are trained lazily and cached per variant.
class MetricSuite {
 public:
  // `train` and `val` may be null when every needed model is preloaded.
  MetricSuite(const Dataset* train, const Dataset* val, const Dataset& test,
              int vocab_size, ScoringConfig config);

  // Cache key of the model conditioned on `conditioning` for `variant`.
  static std::string ModelKey(const Conditioning& conditioning, const std::string& variant);
  // Keys of every model `kind` needs for `variant`.
  static std::vector<std::string> RequiredModels(MetricKind kind, const std::string& variant);

  void Preload(const std::string& key, TrainedPredictor predictor);
  // Trains (or returns the cached) model for `key`.
  const TrainedPredictor& Model(const std::string& key);
  const std::map<std::string, TrainedPredictor>& models() const { return cache_; }

  const TrainedPredictor& Baseline();

  ScoreReport Invariant(const TrainedPredictor& phi, const std::string& variant);
  // Evaluator trained directly on (x, r).
  ScoreReport Ablation(const std::string& variant);
  // I(R -> Y | B): g on B, g' on B ++ R, no question.
  ScoreReport Rev(const std::string& variant);
  ScoreReport Las(const std::string& variant);
  ScoreReport Rq(const std::string& variant);
  ScoreReport Run(MetricKind kind, const std::string& variant);

  // The rationale-only simulator's leaked flags on test (LAS grouping).
  std::vector<bool> LeakedGroups(const std::string& variant);

  const ScoringConfig& config() const { return config_; }

 private:
  ScoreReport Finish(MetricKind kind, const std::string& variant,
                     std::vector<double> pointwise, bool information);

  const Dataset* train_;
  const Dataset* val_;
  const Dataset& test_;
  int vocab_size_;
  ScoringConfig config_;
  std::map<std::string, TrainedPredictor> cache_;
};

}  // namespace rateval

#endif  // RATEVAL_SCORING_H_
