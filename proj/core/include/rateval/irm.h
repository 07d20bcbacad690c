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

#ifndef RATEVAL_IRM_H_
#define RATEVAL_IRM_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rateval/attribution.h"
#include "rateval/corpus.h"
#include "rateval/infill.h"
#include "rateval/training.h"

namespace rateval {

struct IrmConfig {
  double lambda = 10.0;
  TrainConfig train;
  // Penalize the squared batch-mean of the scale gradient per environment,
  // rather than the mean of per-example squares.
  bool penalty_batch = true;
};

struct PenaltyAndGrad {
  double penalty = 0;
  std::vector<double> grad;
};

// g = z . (softmax(z) - onehot(y)) is d CE(w z, y)/dw at w = 1; penalty = g^2.
PenaltyAndGrad IrmPenalty(std::span<const double> logits, int label);
// g_i per example.
double IrmScaleGradient(std::span<const double> logits, int label);
// d g / d z.
std::vector<double> IrmScaleGradientWrtLogits(std::span<const double> logits, int label);

// Aligned examples: envs[e][i] share X and Y across e.
using EnvironmentExamples = std::vector<ExampleSet>;

// Throws DataError unless there are >= 2 environments of equal size with
// equal labels per index.
void CheckAligned(const EnvironmentExamples& envs);

struct IrmEpochLog {
  int epoch = 0;
  int env = 0;
  double erm_loss = 0;
  double penalty = 0;
  double val_objective = 0;
};

struct IrmObjective {
  double total = 0;
  std::vector<double> erm;
  std::vector<double> penalty;
};

// sum_e [mean CE on env e + lambda * penalty_e] over the given indices.
IrmObjective EvaluateIrmObjective(const Model& model, const EnvironmentExamples& envs,
                                  std::span<const size_t> indices, double lambda,
                                  bool penalty_batch);

// Records each scheduled batch of instance indices.
using BatchTrace = std::vector<std::vector<size_t>>;

TrainedPredictor TrainInvariant(const FamilyConfig& family, int vocab_size, int num_labels,
                                const EnvironmentExamples& train,
                                const EnvironmentExamples& val, const IrmConfig& config,
                                std::vector<IrmEpochLog>* log = nullptr,
                                BatchTrace* trace = nullptr);

// ERM on question-only views.
TrainedPredictor TrainBaseline(const Dataset& train, const Dataset& val,
                               const FamilyConfig& family, int vocab_size,
                               const TrainConfig& config);

// D^Mask: leak spans replaced by UNK, no infilling.
Environment BuildMaskEnvironment(const Dataset& dataset, const std::string& variant,
                                 const LeakSelection& masks, const Vocabulary& vocab);

// JSON lines {epoch, env, erm_loss, penalty, val_objective}.
std::string IrmLogJsonl(const std::vector<IrmEpochLog>& log);

}  // namespace rateval

#endif  // RATEVAL_IRM_H_
