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

#include "rateval/training.h"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "rateval/errors.h"
#include "rateval/random.h"

namespace rateval {

using Json = nlohmann::json;

std::vector<double> TrainedPredictor::PredictProba(const View& view) const {
  return Softmax(Logits(view));
}

double TrainedPredictor::LogProb(const View& view, int label) const {
  return -CrossEntropyGrad(Logits(view), label).loss;
}

int TrainedPredictor::Predict(const View& view) const {
  const std::vector<double> z = Logits(view);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double MeanCrossEntropy(const Model& model, const ExampleSet& examples) {
  if (examples.empty()) return 0.0;
  double total = 0;
  for (const Example& ex : examples) total += CrossEntropyGrad(model.Forward(ex.view), ex.label).loss;
  return total / static_cast<double>(examples.size());
}

std::vector<std::vector<size_t>> MakeBatches(size_t n, int batch_size, uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.Shuffle(std::span<size_t>(order));
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < n; start += static_cast<size_t>(batch_size)) {
    const size_t end = std::min(n, start + static_cast<size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
  }
  return batches;
}

TrainedPredictor TrainErm(const FamilyConfig& family, int vocab_size, int num_labels,
                          const ExampleSet& train, const ExampleSet& val,
                          const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train.empty() || val.empty()) throw ConfigError("train_erm needs nonempty train and val sets");
  if (config.max_epochs < 0 || config.patience < 1) {
    throw ConfigError("max_epochs must be >= 0 and patience >= 1");
  }
  std::unique_ptr<Model> model = MakeModel(family, vocab_size, num_labels, DeriveSeed(config.seed, "init"));
  Optimizer opt(config.optimizer, model->parameters());
  TrainingMetadata meta;
  meta.seed = config.seed;
  meta.best_val_loss = MeanCrossEntropy(*model, val);
  meta.val_history.push_back(meta.best_val_loss);
  std::unique_ptr<Model> best = model->Clone();
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto batches = MakeBatches(train.size(), config.batch_size,
                                     DeriveSeed(config.seed, "epoch/" + std::to_string(epoch)));
    double epoch_loss = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      std::vector<Matrix> grads = model->ZeroGradients();
      double batch_loss = 0;
      const double scale = 1.0 / static_cast<double>(batches[b].size());
      for (size_t i : batches[b]) {
        const Example& ex = train[i];
        LossAndGrad lg = CrossEntropyGrad(model->Forward(ex.view), ex.label);
        batch_loss += lg.loss;
        for (double& g : lg.grad) g *= scale;
        model->Backward(ex.view, lg.grad, grads);
      }
      batch_loss *= scale;
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b));
      }
      epoch_loss += batch_loss * static_cast<double>(batches[b].size());
      opt.Step(model->parameters(), grads);
    }
    epoch_loss /= static_cast<double>(train.size());
    const double val_loss = MeanCrossEntropy(*model, val);
    meta.val_history.push_back(val_loss);
    meta.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, epoch_loss, val_loss);
    if (!std::isfinite(val_loss)) throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    if (val_loss < meta.best_val_loss) {
      meta.best_val_loss = val_loss;
      meta.best_epoch = epoch;
      best = model->Clone();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return TrainedPredictor(std::shared_ptr<const Model>(std::move(best)), meta);
}

std::string SerializeCheckpoint(const TrainedPredictor& predictor) {
  const Model& m = predictor.model();
  const TrainingMetadata& meta = predictor.metadata();
  Json j;
  j["format"] = "rateval-checkpoint";
  j["version"] = 1;
  j["family"] = {{"architecture", ArchitectureName(m.architecture())},
                 {"embedding_dim", m.family().embedding_dim},
                 {"ngram_order", m.family().ngram_order},
                 {"bigram_buckets", m.family().bigram_buckets}};
  j["vocab_size"] = m.vocab_size();
  j["num_labels"] = m.num_labels();
  j["metadata"] = {{"best_val_loss", meta.best_val_loss},
                   {"best_epoch", meta.best_epoch},
                   {"epochs_run", meta.epochs_run},
                   {"seed", meta.seed},
                   {"val_history", meta.val_history}};
  Json params = Json::array();
  for (const Parameter& p : m.parameters()) {
    params.push_back({{"name", p.name}, {"rows", p.value.rows}, {"cols", p.value.cols}, {"data", p.value.data}});
  }
  j["parameters"] = params;
  return j.dump();
}

TrainedPredictor ParseCheckpoint(const std::string& json_text) {
  try {
    const Json j = Json::parse(json_text);
    if (j.at("format") != "rateval-checkpoint" || j.at("version") != 1) {
      throw DataError("unsupported checkpoint format");
    }
    FamilyConfig family;
    family.architecture = ArchitectureFromName(j.at("family").at("architecture").get<std::string>());
    family.embedding_dim = j["family"].at("embedding_dim").get<int>();
    family.ngram_order = j["family"].at("ngram_order").get<int>();
    family.bigram_buckets = j["family"].at("bigram_buckets").get<int>();
    std::unique_ptr<Model> m = MakeModel(family, j.at("vocab_size").get<int>(),
                                         std::max(2, j.at("num_labels").get<int>()), 0);
    const Json& params = j.at("parameters");
    if (params.size() != m->parameters().size()) throw DataError("checkpoint parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
      Parameter& p = m->parameters()[i];
      if (params[i].at("name") != p.name || params[i].at("rows").get<int>() != p.value.rows ||
          params[i].at("cols").get<int>() != p.value.cols) {
        throw DataError("checkpoint parameter shape mismatch for '" + p.name + "'");
      }
      p.value.data = params[i].at("data").get<std::vector<double>>();
      if (p.value.data.size() != static_cast<size_t>(p.value.rows) * p.value.cols) {
        throw DataError("checkpoint parameter size mismatch for '" + p.name + "'");
      }
    }
    TrainingMetadata meta;
    const Json& md = j.at("metadata");
    meta.best_val_loss = md.at("best_val_loss").get<double>();
    meta.best_epoch = md.at("best_epoch").get<int>();
    meta.epochs_run = md.at("epochs_run").get<int>();
    meta.seed = md.at("seed").get<uint64_t>();
    meta.val_history = md.at("val_history").get<std::vector<double>>();
    return TrainedPredictor(std::shared_ptr<const Model>(std::move(m)), meta);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace rateval
