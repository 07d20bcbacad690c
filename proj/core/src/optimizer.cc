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

#include "rateval/optimizer.h"

#include <cmath>

#include "rateval/errors.h"

namespace rateval {

std::string OptimizerName(OptimizerKind kind) {
  return kind == OptimizerKind::kAdamW ? "adamw" : "momentum";
}

OptimizerKind OptimizerFromName(const std::string& name) {
  if (name == "adamw") return OptimizerKind::kAdamW;
  if (name == "momentum") return OptimizerKind::kMomentum;
  throw ConfigError("unknown optimizer '" + name + "'");
}

Optimizer::Optimizer(const OptimizerConfig& config, const std::vector<Parameter>& params)
    : config_(config) {
  if (!(config.learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
  if (config.weight_decay < 0) throw ConfigError("weight_decay must be >= 0");
  for (const Parameter& p : params) {
    first_.emplace_back(p.value.rows, p.value.cols);
    if (config.kind == OptimizerKind::kAdamW) second_.emplace_back(p.value.rows, p.value.cols);
  }
}

void Optimizer::Step(std::vector<Parameter>& params, const std::vector<Matrix>& grads) {
  ++step_;
  const double lr = config_.learning_rate;
  const double decay = 1.0 - lr * config_.weight_decay;
  if (config_.kind == OptimizerKind::kAdamW) {
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
      std::vector<double>& w = params[i].value.data;
      const std::vector<double>& g = grads[i].data;
      std::vector<double>& m = first_[i].data;
      std::vector<double>& v = second_[i].data;
      for (size_t k = 0; k < w.size(); ++k) {
        m[k] = b1 * m[k] + (1 - b1) * g[k];
        v[k] = b2 * v[k] + (1 - b2) * g[k] * g[k];
        const double update = (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.epsilon);
        w[k] = w[k] * decay - lr * update;
      }
    }
    return;
  }
  for (size_t i = 0; i < params.size(); ++i) {
    std::vector<double>& w = params[i].value.data;
    const std::vector<double>& g = grads[i].data;
    std::vector<double>& m = first_[i].data;
    for (size_t k = 0; k < w.size(); ++k) {
      m[k] = config_.momentum * m[k] + g[k];
      w[k] = w[k] * decay - lr * m[k];
    }
  }
}

}  // namespace rateval
