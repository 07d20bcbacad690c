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

#ifndef RATEVAL_PIPELINE_H_
#define RATEVAL_PIPELINE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rateval/attribution.h"
#include "rateval/benchgen.h"
#include "rateval/corpus.h"
#include "rateval/infill.h"
#include "rateval/irm.h"
#include "rateval/scoring.h"

namespace rateval {

std::string ToolVersion();

// Everything one end-to-end run needs. Serialized as a single JSON document;
// CLI flags override fields (flags > config > defaults).
struct RunConfig {
  uint64_t seed = 1;
  std::string out_dir = "run";

  // Data: either a synthetic spec or a directory holding
  // {train,val,test}.jsonl.
  std::optional<SyntheticSpec> synthetic = SyntheticSpec{};
  std::string data_dir;
  std::vector<std::string> labels;  // fixed labels for ingested data
  int min_count = 1;

  std::vector<std::string> variants{"gold", "gold_leaky", "vacuous", "leaky"};
  std::vector<MetricKind> metrics{MetricKind::kInvariant, MetricKind::kAblation,
                                  MetricKind::kRev, MetricKind::kLas, MetricKind::kRq};

  DetectionConfig detection = DefaultDetectionConfig();
  InfillerConfig infill;
  bool reuse_original = false;

  FamilyConfig evaluator;
  TrainConfig evaluator_train;
  IrmConfig irm;

  int bootstrap_resamples = 1000;
  bool bits = false;
  double las_margin = 0.25;

  // Canonical JSON (sorted keys); excludes out_dir.
  std::string CanonicalJson() const;
  // Stable hash of CanonicalJson() and the tool version.
  std::string Fingerprint() const;
};

RunConfig DefaultRunConfig();
// Throws ConfigError on unknown keys or invalid values.
RunConfig ParseRunConfig(const std::string& json_text);
std::string RunConfigToJson(const RunConfig& config);

// Per-stage seeds: DeriveSeed(config.seed, stage).
uint64_t StageSeed(const RunConfig& config, const std::string& stage);

struct PipelineData {
  Dataset train, val, test;
  Vocabulary vocab;
  std::optional<OracleTable> oracle;
  std::set<std::string> leaked_ids;
};

// Generates or loads the three splits and builds the vocabulary.
PipelineData PrepareData(const RunConfig& config);

struct VariantRun {
  DetectionResult detection;
  LeakSelection val_selection;
  Infiller infiller;
  std::vector<Environment> train_envs;
  std::vector<Environment> val_envs;
  TrainedPredictor phi;
  std::vector<IrmEpochLog> log;
};

// Leak detection, counterfactual augmentation and invariant training for one
// rationale variant.
VariantRun RunVariant(const RunConfig& config, const PipelineData& data,
                      const std::string& variant);

// Augmentation + invariant training from an existing selection.
VariantRun TrainFromSelection(const RunConfig& config, const PipelineData& data,
                              const std::string& variant, DetectionResult detection);

TrainedPredictor TrainQuestionBaseline(const RunConfig& config, const PipelineData& data);

ScoringConfig MakeScoringConfig(const RunConfig& config);

// Full in-memory pipeline: every configured metric for every variant.
std::vector<ScoreReport> RunAll(const RunConfig& config, const PipelineData& data);

struct MaskingDemoResult {
  double counterfactual_irm = 0;  // full pipeline
  double masked_irm = 0;          // IRM over {D, D^Mask}
  double plain_erm = 0;           // ERM on D
  std::vector<ScoreReport> reports;
};

// Leaky-variant scores for the three evaluator constructions.
MaskingDemoResult RunMaskingDemo(const RunConfig& config, const PipelineData& data,
                                 const std::string& variant = "leaky");

// ---- file-backed CLI stages (artifacts under config.out_dir) ----

struct StageOutcome {
  bool skipped = false;
  std::vector<std::string> written;
};

StageOutcome CmdGen(const SyntheticSpec& spec, const std::string& out_dir);
StageOutcome CmdDetect(const RunConfig& config);
StageOutcome CmdAugment(const RunConfig& config);
StageOutcome CmdTrain(const RunConfig& config);
StageOutcome CmdScore(const RunConfig& config);

enum class SweepAxis { kThreshold, kLambda };
StageOutcome CmdSweep(const RunConfig& config, SweepAxis axis,
                      const std::vector<double>& values);
StageOutcome CmdMaskingDemo(const RunConfig& config);
// Markdown + TSV summary across every report.json under `run_dir`.
StageOutcome CmdReport(const std::string& run_dir);

}  // namespace rateval

#endif  // RATEVAL_PIPELINE_H_
