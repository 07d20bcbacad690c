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

#ifndef RATEVAL_TRAINING_H_
#define RATEVAL_TRAINING_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rateval/model.h"
#include "rateval/optimizer.h"

namespace rateval {

struct TrainConfig {
  int max_epochs = 20;
  int patience = 3;
  int batch_size = 64;
  uint64_t seed = 0;
  OptimizerConfig optimizer;
};

struct Example {
  View view;
  int label = 0;
};

using ExampleSet = std::vector<Example>;

struct TrainingMetadata {
  double best_val_loss = 0;
  int best_epoch = 0;
  int epochs_run = 0;
  uint64_t seed = 0;
  std::vector<double> val_history;
};

// A frozen member of the predictive family. Cheap to copy; parameters are
// shared and never mutated.
class TrainedPredictor {
 public:
  TrainedPredictor() = default;
  TrainedPredictor(std::shared_ptr<const Model> model, TrainingMetadata meta)
      : model_(std::move(model)), meta_(std::move(meta)) {}

  const Model& model() const { return *model_; }
  bool valid() const { return model_ != nullptr; }
  const TrainingMetadata& metadata() const { return meta_; }

  std::vector<double> Logits(const View& view) const { return model_->Forward(view); }
  std::vector<double> PredictProba(const View& view) const;
  // ln p(label | view).
  double LogProb(const View& view, int label) const;
  // Argmax; ties go to the lowest index.
  int Predict(const View& view) const;

 private:
  std::shared_ptr<const Model> model_;
  TrainingMetadata meta_;
};

double MeanCrossEntropy(const Model& model, const ExampleSet& examples);

// Fixed-order mini-batches of indices into [0, n) for one epoch.
std::vector<std::vector<size_t>> MakeBatches(size_t n, int batch_size, uint64_t seed);

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

// Mini-batch cross-entropy minimization with early stopping on validation
// loss; returns the best-validation checkpoint. Throws ConfigError on empty
// splits and DivergenceError on a non-finite batch loss.
TrainedPredictor TrainErm(const FamilyConfig& family, int vocab_size, int num_labels,
                          const ExampleSet& train, const ExampleSet& val,
                          const TrainConfig& config, const EpochCallback& on_epoch = {});

// Versioned JSON dump of family, parameters and metadata. Round-trips exactly.
std::string SerializeCheckpoint(const TrainedPredictor& predictor);
TrainedPredictor ParseCheckpoint(const std::string& json_text);

}  // namespace rateval

#endif  // RATEVAL_TRAINING_H_
