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

#ifndef RATEVAL_OPTIMIZER_H_
#define RATEVAL_OPTIMIZER_H_

#include <string>
#include <vector>

#include "rateval/model.h"

namespace rateval {

enum class OptimizerKind { kAdamW, kMomentum };

std::string OptimizerName(OptimizerKind kind);
OptimizerKind OptimizerFromName(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double learning_rate = 0.01;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
};

// Adaptive-moment updates with decoupled weight decay, or heavy-ball momentum.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const std::vector<Parameter>& params);

  void Step(std::vector<Parameter>& params, const std::vector<Matrix>& grads);
  long steps() const { return step_; }

 private:
  OptimizerConfig config_;
  long step_ = 0;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
};

}  // namespace rateval

#endif  // RATEVAL_OPTIMIZER_H_
