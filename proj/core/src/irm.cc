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

#include "rateval/irm.h"

#include <cmath>

#include "json.hpp"
#include "rateval/errors.h"
#include "rateval/io.h"
#include "rateval/random.h"
#include "rateval/views.h"

namespace rateval {

double IrmScaleGradient(std::span<const double> logits, int label) {
  const std::vector<double> p = Softmax(logits);
  double g = 0;
  for (size_t j = 0; j < p.size(); ++j) {
    g += logits[j] * (p[j] - (static_cast<int>(j) == label ? 1.0 : 0.0));
  }
  return g;
}

std::vector<double> IrmScaleGradientWrtLogits(std::span<const double> logits, int label) {
  const std::vector<double> p = Softmax(logits);
  double zp = 0;
  for (size_t j = 0; j < p.size(); ++j) zp += logits[j] * p[j];
  std::vector<double> dg(p.size());
  for (size_t j = 0; j < p.size(); ++j) {
    dg[j] = (p[j] - (static_cast<int>(j) == label ? 1.0 : 0.0)) + p[j] * (logits[j] - zp);
  }
  return dg;
}

PenaltyAndGrad IrmPenalty(std::span<const double> logits, int label) {
  const double g = IrmScaleGradient(logits, label);
  PenaltyAndGrad out;
  out.penalty = g * g;
  out.grad = IrmScaleGradientWrtLogits(logits, label);
  for (double& v : out.grad) v *= 2.0 * g;
  return out;
}

void CheckAligned(const EnvironmentExamples& envs) {
  if (envs.size() < 2) throw DataError("invariant training needs at least 2 environments");
  for (size_t e = 1; e < envs.size(); ++e) {
    if (envs[e].size() != envs[0].size()) throw DataError("environments differ in size");
    for (size_t i = 0; i < envs[0].size(); ++i) {
      if (envs[e][i].label != envs[0][i].label) {
        throw DataError("environments are misaligned at index " + std::to_string(i));
      }
    }
  }
}

IrmObjective EvaluateIrmObjective(const Model& model, const EnvironmentExamples& envs,
                                  std::span<const size_t> indices, double lambda,
                                  bool penalty_batch) {
  IrmObjective obj;
  if (indices.empty()) return obj;
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (const ExampleSet& env : envs) {
    double erm = 0, g_sum = 0, g2_sum = 0;
    for (size_t i : indices) {
      const std::vector<double> z = model.Forward(env[i].view);
      erm += CrossEntropyGrad(z, env[i].label).loss;
      const double g = IrmScaleGradient(z, env[i].label);
      g_sum += g;
      g2_sum += g * g;
    }
    erm *= inv;
    const double penalty = penalty_batch ? (g_sum * inv) * (g_sum * inv) : g2_sum * inv;
    obj.erm.push_back(erm);
    obj.penalty.push_back(penalty);
    obj.total += erm + lambda * penalty;
  }
  return obj;
}

TrainedPredictor TrainInvariant(const FamilyConfig& family, int vocab_size, int num_labels,
                                const EnvironmentExamples& train, const EnvironmentExamples& val,
                                const IrmConfig& config, std::vector<IrmEpochLog>* log,
                                BatchTrace* trace) {
  CheckAligned(train);
  CheckAligned(val);
  if (train[0].empty() || val[0].empty()) throw ConfigError("invariant training needs nonempty splits");
  if (!(config.lambda >= 0)) throw ConfigError("lambda must be >= 0");
  const TrainConfig& tc = config.train;
  if (tc.max_epochs < 0 || tc.patience < 1) throw ConfigError("max_epochs must be >= 0 and patience >= 1");

  std::unique_ptr<Model> model = MakeModel(family, vocab_size, num_labels, DeriveSeed(tc.seed, "init"));
  Optimizer opt(tc.optimizer, model->parameters());
  std::vector<size_t> all_val(val[0].size());
  for (size_t i = 0; i < all_val.size(); ++i) all_val[i] = i;
  auto val_objective = [&] {
    return EvaluateIrmObjective(*model, val, all_val, config.lambda, config.penalty_batch).total;
  };

  TrainingMetadata meta;
  meta.seed = tc.seed;
  meta.best_val_loss = val_objective();
  meta.val_history.push_back(meta.best_val_loss);
  std::unique_ptr<Model> best = model->Clone();
  int since_best = 0;
  const size_t num_envs = train.size();

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto batches =
        MakeBatches(train[0].size(), tc.batch_size, DeriveSeed(tc.seed, "epoch/" + std::to_string(epoch)));
    std::vector<double> erm_sum(num_envs, 0.0), pen_sum(num_envs, 0.0);
    for (size_t b = 0; b < batches.size(); ++b) {
      const std::vector<size_t>& batch = batches[b];
      if (trace) trace->push_back(batch);
      const double inv = 1.0 / static_cast<double>(batch.size());
      std::vector<Matrix> grads = model->ZeroGradients();
      double objective = 0;
      for (size_t e = 0; e < num_envs; ++e) {
        std::vector<std::vector<double>> logits;
        std::vector<double> g(batch.size());
        double erm = 0, g_mean = 0, g2_mean = 0;
        for (size_t k = 0; k < batch.size(); ++k) {
          const Example& ex = train[e][batch[k]];
          logits.push_back(model->Forward(ex.view));
          g[k] = IrmScaleGradient(logits.back(), ex.label);
          g_mean += g[k] * inv;
          g2_mean += g[k] * g[k] * inv;
        }
        for (size_t k = 0; k < batch.size(); ++k) {
          const Example& ex = train[e][batch[k]];
          LossAndGrad lg = CrossEntropyGrad(logits[k], ex.label);
          erm += lg.loss * inv;
          std::vector<double> dlogits = lg.grad;
          for (double& v : dlogits) v *= inv;
          if (config.lambda > 0) {
            const std::vector<double> dg = IrmScaleGradientWrtLogits(logits[k], ex.label);
            // d(mean g)^2 / dz = 2 mean(g) dg / B; d mean(g^2) / dz = 2 g dg / B.
            const double coef = 2.0 * (config.penalty_batch ? g_mean : g[k]) * inv * config.lambda;
            for (size_t j = 0; j < dlogits.size(); ++j) dlogits[j] += coef * dg[j];
          }
          model->Backward(ex.view, dlogits, grads);
        }
        const double penalty = config.penalty_batch ? g_mean * g_mean : g2_mean;
        objective += erm + config.lambda * penalty;
        erm_sum[e] += erm * static_cast<double>(batch.size());
        pen_sum[e] += penalty * static_cast<double>(batch.size());
      }
      if (!std::isfinite(objective)) {
        throw DivergenceError("non-finite objective at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b));
      }
      opt.Step(model->parameters(), grads);
    }
    const double v = val_objective();
    if (!std::isfinite(v)) throw DivergenceError("non-finite validation objective at epoch " + std::to_string(epoch));
    meta.val_history.push_back(v);
    meta.epochs_run = epoch;
    if (log) {
      for (size_t e = 0; e < num_envs; ++e) {
        const double n = static_cast<double>(train[0].size());
        log->push_back({epoch, static_cast<int>(e), erm_sum[e] / n, pen_sum[e] / n, v});
      }
    }
    if (v < meta.best_val_loss) {
      meta.best_val_loss = v;
      meta.best_epoch = epoch;
      best = model->Clone();
      since_best = 0;
    } else if (++since_best >= tc.patience) {
      break;
    }
  }
  return TrainedPredictor(std::shared_ptr<const Model>(std::move(best)), meta);
}

TrainedPredictor TrainBaseline(const Dataset& train, const Dataset& val, const FamilyConfig& family,
                               int vocab_size, const TrainConfig& config) {
  FamilyConfig f = family;
  if (train.label_space.mode == LabelMode::kPerInstance) f.architecture = Architecture::kBiEncoder;
  return TrainErm(f, vocab_size, std::max(2, NumFixedLabels(train)),
                  BuildExamples(train, Conditioning::Question(), ""),
                  BuildExamples(val, Conditioning::Question(), ""), config);
}

Environment BuildMaskEnvironment(const Dataset& dataset, const std::string& variant,
                                 const LeakSelection& masks, const Vocabulary& vocab) {
  if (masks.masks.size() != dataset.size()) throw DataError("masks do not align with the dataset");
  Environment env;
  env.label_value = -1;
  env.label_text = "mask";
  env.data = dataset;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const LeakMask& mask = masks.masks[i];
    if (mask.empty()) continue;
    auto it = env.data.instances[i].rationales.find(variant);
    if (it == env.data.instances[i].rationales.end()) continue;
    const TokenSeq& r = it->second.tokens;
    TokenSeq out;
    for (size_t j = 0; j < r.size(); ++j) {
      if (!mask.selected[j]) {
        out.push_back(r[j]);
      } else if (j == 0 || !mask.selected[j - 1]) {
        out.push_back(Vocabulary::kUnk);
      }
    }
    it->second.text = vocab.Decode(out);
    it->second.tokens = std::move(out);
  }
  env.data.provenance = {{"variant", variant}, {"mask_rule", masks.rule.Describe()}, {"environment", "mask"}};
  return env;
}

std::string IrmLogJsonl(const std::vector<IrmEpochLog>& log) {
  std::string out;
  for (const IrmEpochLog& l : log) {
    nlohmann::ordered_json j;
    j["epoch"] = l.epoch;
    j["env"] = l.env;
    j["erm_loss"] = l.erm_loss;
    j["penalty"] = l.penalty;
    j["val_objective"] = l.val_objective;
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace rateval
