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

#include "rateval/scoring.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "rateval/errors.h"
#include "rateval/random.h"

namespace rateval {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double Percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = std::min(sorted.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

void CheckCompatible(const TrainedPredictor& a, const TrainedPredictor& b) {
  if (!a.valid() || !b.valid()) throw DataError("scoring needs trained models");
  if (a.model().architecture() != b.model().architecture() ||
      a.model().num_labels() != b.model().num_labels() ||
      a.model().vocab_size() != b.model().vocab_size()) {
    throw DataError("models disagree on the label space or vocabulary");
  }
}

Conditioning ParseConditioning(const std::string& desc) {
  Conditioning c;
  if (desc == "none") return c;
  size_t start = 0;
  while (start <= desc.size()) {
    const size_t end = std::min(desc.find('+', start), desc.size());
    const std::string part = desc.substr(start, end - start);
    if (part == "x") c.question = true;
    else if (part == "b") c.vacuous = true;
    else if (part == "r") c.rationale = true;
    else throw ConfigError("unknown conditioning '" + desc + "'");
    start = end + 1;
  }
  return c;
}

}  // namespace

std::string MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kInvariant: return "invariant";
    case MetricKind::kAblation: return "ablation";
    case MetricKind::kRev: return "rev";
    case MetricKind::kLas: return "las";
    case MetricKind::kRq: return "rq";
  }
  return "invariant";
}

MetricKind MetricFromName(const std::string& name) {
  for (MetricKind k : {MetricKind::kInvariant, MetricKind::kAblation, MetricKind::kRev, MetricKind::kLas,
                       MetricKind::kRq}) {
    if (MetricName(k) == name) return k;
  }
  throw ConfigError("unknown metric '" + name + "'");
}

EntropyEstimate EstimateEntropy(const TrainedPredictor& model, const Dataset& data,
                                const Conditioning& conditioning, const std::string& variant,
                                const std::string& model_id) {
  EntropyEstimate est;
  est.conditioning = conditioning;
  est.model_id = model_id;
  const ExampleSet ex = BuildExamples(data, conditioning, variant);
  if (ex.empty()) throw DataError("entropy estimate needs a nonempty dataset");
  double total = 0;
  for (const Example& e : ex) total -= model.LogProb(e.view, e.label);
  est.nats = total / static_cast<double>(ex.size());
  return est;
}

Interval BootstrapCi(std::span<const double> pointwise, int resamples, uint64_t seed) {
  if (pointwise.empty()) return {kNaN, kNaN};
  if (resamples < 1) throw ConfigError("bootstrap needs >= 1 resample");
  Rng rng(seed);
  const size_t n = pointwise.size();
  std::vector<double> means;
  means.reserve(static_cast<size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    double s = 0;
    for (size_t k = 0; k < n; ++k) s += pointwise[rng.Below(n)];
    means.push_back(s / static_cast<double>(n));
  }
  std::sort(means.begin(), means.end());
  return {Percentile(means, 0.025), Percentile(means, 0.975)};
}

ScoreReport InvariantScore(const TrainedPredictor& phi, const TrainedPredictor& theta,
                           const Dataset& test, const std::string& variant,
                           const ScoringConfig& config) {
  MetricSuite suite(nullptr, nullptr, test, theta.model().vocab_size(), config);
  suite.Preload(MetricSuite::ModelKey(Conditioning::Question(), variant), theta);
  return suite.Invariant(phi, variant);
}

MetricSuite::MetricSuite(const Dataset* train, const Dataset* val, const Dataset& test, int vocab_size,
                         ScoringConfig config)
    : train_(train), val_(val), test_(test), vocab_size_(vocab_size), config_(std::move(config)) {}

std::string MetricSuite::ModelKey(const Conditioning& conditioning, const std::string& variant) {
  const std::string desc = conditioning.Describe();
  return conditioning.rationale ? desc + "/" + variant : desc;
}

std::vector<std::string> MetricSuite::RequiredModels(MetricKind kind, const std::string& variant) {
  const std::string x = ModelKey(Conditioning::Question(), variant);
  const std::string xr = ModelKey(Conditioning::QuestionRationale(), variant);
  switch (kind) {
    case MetricKind::kInvariant: return {x};
    case MetricKind::kAblation:
    case MetricKind::kRq: return {x, xr};
    case MetricKind::kRev:
      return {ModelKey(Conditioning::Vacuous(), variant), ModelKey(Conditioning::VacuousRationale(), variant)};
    case MetricKind::kLas: return {x, xr, ModelKey(Conditioning::RationaleOnly(), variant)};
  }
  return {};
}

void MetricSuite::Preload(const std::string& key, TrainedPredictor predictor) {
  cache_[key] = std::move(predictor);
}

const TrainedPredictor& MetricSuite::Model(const std::string& key) {
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  if (!train_ || !val_) throw ConfigError("model '" + key + "' is neither preloaded nor trainable");
  const size_t slash = key.find('/');
  const Conditioning cond = ParseConditioning(key.substr(0, slash));
  const std::string variant = slash == std::string::npos ? "" : key.substr(slash + 1);
  FamilyConfig family = config_.family;
  if (train_->label_space.mode == LabelMode::kPerInstance) family.architecture = Architecture::kBiEncoder;
  TrainConfig tc = config_.train;
  tc.seed = DeriveSeed(config_.seed, "model/" + key);
  TrainedPredictor p = TrainErm(family, vocab_size_, std::max(2, NumFixedLabels(*train_)),
                                BuildExamples(*train_, cond, variant), BuildExamples(*val_, cond, variant), tc);
  return cache_.emplace(key, std::move(p)).first->second;
}

const TrainedPredictor& MetricSuite::Baseline() { return Model(ModelKey(Conditioning::Question(), "")); }

ScoreReport MetricSuite::Finish(MetricKind kind, const std::string& variant,
                                std::vector<double> pointwise, bool information) {
  ScoreReport r;
  r.metric = kind;
  r.variant = variant;
  r.n = pointwise.size();
  if (information && config_.bits) {
    for (double& v : pointwise) v /= std::numbers::ln2;
  }
  r.units = information ? (config_.bits ? "bits" : "nats") : "accuracy";
  double sum = 0;
  for (double v : pointwise) sum += v;
  r.mean = pointwise.empty() ? kNaN : sum / static_cast<double>(pointwise.size());
  r.ci = BootstrapCi(pointwise, config_.bootstrap_resamples,
                     DeriveSeed(config_.seed, "bootstrap/" + MetricName(kind) + "/" + variant));
  if (std::isfinite(r.mean)) {
    // A percentile interval can miss the mean on skewed data; widen to include it.
    r.ci.lo = std::min(r.ci.lo, r.mean);
    r.ci.hi = std::max(r.ci.hi, r.mean);
  }
  r.pointwise = std::move(pointwise);
  r.fingerprint = config_.fingerprint;
  return r;
}

ScoreReport MetricSuite::Invariant(const TrainedPredictor& phi, const std::string& variant) {
  const TrainedPredictor& theta = Baseline();
  CheckCompatible(phi, theta);
  const ExampleSet xr = BuildExamples(test_, Conditioning::QuestionRationale(), variant);
  const ExampleSet x = BuildExamples(test_, Conditioning::Question(), variant);
  std::vector<double> pw;
  for (size_t i = 0; i < xr.size(); ++i) {
    pw.push_back(phi.LogProb(xr[i].view, xr[i].label) - theta.LogProb(x[i].view, x[i].label));
  }
  return Finish(MetricKind::kInvariant, variant, std::move(pw), true);
}

ScoreReport MetricSuite::Ablation(const std::string& variant) {
  const TrainedPredictor& phi = Model(ModelKey(Conditioning::QuestionRationale(), variant));
  ScoreReport r = Invariant(phi, variant);
  r.metric = MetricKind::kAblation;
  r.ci = BootstrapCi(r.pointwise, config_.bootstrap_resamples,
                     DeriveSeed(config_.seed, "bootstrap/" + MetricName(r.metric) + "/" + variant));
  if (std::isfinite(r.mean)) {
    r.ci.lo = std::min(r.ci.lo, r.mean);
    r.ci.hi = std::max(r.ci.hi, r.mean);
  }
  return r;
}

ScoreReport MetricSuite::Rev(const std::string& variant) {
  const TrainedPredictor& g = Model(ModelKey(Conditioning::Vacuous(), variant));
  const TrainedPredictor& g2 = Model(ModelKey(Conditioning::VacuousRationale(), variant));
  const ExampleSet b = BuildExamples(test_, Conditioning::Vacuous(), variant);
  const ExampleSet br = BuildExamples(test_, Conditioning::VacuousRationale(), variant);
  std::vector<double> pw;
  for (size_t i = 0; i < b.size(); ++i) {
    pw.push_back(g2.LogProb(br[i].view, br[i].label) - g.LogProb(b[i].view, b[i].label));
  }
  return Finish(MetricKind::kRev, variant, std::move(pw), true);
}

std::vector<bool> MetricSuite::LeakedGroups(const std::string& variant) {
  const TrainedPredictor& sim = Model(ModelKey(Conditioning::RationaleOnly(), variant));
  const ExampleSet r = BuildExamples(test_, Conditioning::RationaleOnly(), variant);
  std::vector<bool> leaked;
  for (size_t i = 0; i < r.size(); ++i) {
    const std::vector<double> p = sim.PredictProba(r[i].view);
    const double chance = 1.0 / static_cast<double>(p.size());
    leaked.push_back(p[static_cast<size_t>(r[i].label)] >= chance + config_.las_margin);
  }
  return leaked;
}

ScoreReport MetricSuite::Las(const std::string& variant) {
  const std::vector<bool> leaked = LeakedGroups(variant);
  const TrainedPredictor& sim_xr = Model(ModelKey(Conditioning::QuestionRationale(), variant));
  const TrainedPredictor& theta = Baseline();
  const ExampleSet xr = BuildExamples(test_, Conditioning::QuestionRationale(), variant);
  const ExampleSet x = BuildExamples(test_, Conditioning::Question(), variant);
  std::vector<double> diff(xr.size());
  double sum[2] = {0, 0};
  size_t count[2] = {0, 0};
  for (size_t i = 0; i < xr.size(); ++i) {
    diff[i] = (sim_xr.Predict(xr[i].view) == xr[i].label ? 1.0 : 0.0) -
              (theta.Predict(x[i].view) == x[i].label ? 1.0 : 0.0);
    const int g = leaked[i] ? 1 : 0;
    sum[g] += diff[i];
    ++count[g];
  }
  const size_t n = diff.size();
  std::vector<double> pw(n);
  for (size_t i = 0; i < n; ++i) {
    const size_t c = count[leaked[i] ? 1 : 0];
    pw[i] = diff[i] * static_cast<double>(n) / (2.0 * static_cast<double>(c));
  }
  ScoreReport r;
  if (count[0] == 0 || count[1] == 0) {
    r = Finish(MetricKind::kLas, variant, {}, false);
    r.pointwise = diff;
    r.n = n;
  } else {
    r = Finish(MetricKind::kLas, variant, std::move(pw), false);
  }
  r.details["n_leaked"] = static_cast<double>(count[1]);
  r.details["n_nonleaked"] = static_cast<double>(count[0]);
  r.details["gain_leaked"] = count[1] ? sum[1] / static_cast<double>(count[1]) : kNaN;
  r.details["gain_nonleaked"] = count[0] ? sum[0] / static_cast<double>(count[0]) : kNaN;
  return r;
}

ScoreReport MetricSuite::Rq(const std::string& variant) {
  const TrainedPredictor& m = Model(ModelKey(Conditioning::QuestionRationale(), variant));
  const TrainedPredictor& theta = Baseline();
  const ExampleSet xr = BuildExamples(test_, Conditioning::QuestionRationale(), variant);
  const ExampleSet x = BuildExamples(test_, Conditioning::Question(), variant);
  std::vector<double> pw;
  for (size_t i = 0; i < xr.size(); ++i) {
    pw.push_back((m.Predict(xr[i].view) == xr[i].label ? 1.0 : 0.0) -
                 (theta.Predict(x[i].view) == x[i].label ? 1.0 : 0.0));
  }
  return Finish(MetricKind::kRq, variant, std::move(pw), false);
}

ScoreReport MetricSuite::Run(MetricKind kind, const std::string& variant) {
  switch (kind) {
    case MetricKind::kAblation: return Ablation(variant);
    case MetricKind::kRev: return Rev(variant);
    case MetricKind::kLas: return Las(variant);
    case MetricKind::kRq: return Rq(variant);
    case MetricKind::kInvariant: break;
  }
  throw ConfigError("the invariant metric needs an evaluator; use Invariant()");
}

}  // namespace rateval
