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

#include "rateval/pipeline.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "rateval/errors.h"
#include "rateval/io.h"
#include "rateval/random.h"
#include "rateval/report.h"
#include "rateval/views.h"

#ifndef RATEVAL_VERSION
#define RATEVAL_VERSION "0.0.0"
#endif

namespace rateval {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;  // sorted keys: canonical form

std::string Hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Path(const RunConfig& c, const std::string& rel) { return (fs::path(c.out_dir) / rel).string(); }

// ---- config (de)serialization ----

template <typename T>
void Take(const Json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void CheckKeys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

Json ToJson(const RunConfig& c, bool include_out) {
  Json j;
  j["seed"] = c.seed;
  if (include_out) j["out"] = c.out_dir;
  Json data;
  if (c.synthetic) {
    Json spec = Json::parse(SpecToJson(*c.synthetic));
    spec.erase("seed");  // derived from the master seed
    data["synthetic"] = spec;
  } else {
    data["dir"] = c.data_dir;
    data["labels"] = c.labels;
  }
  data["min_count"] = c.min_count;
  j["data"] = data;
  j["variants"] = c.variants;
  std::vector<std::string> metrics;
  for (MetricKind m : c.metrics) metrics.push_back(MetricName(m));
  j["metrics"] = metrics;
  const DetectionConfig& d = c.detection;
  j["detection"] = {
      {"ig_steps", d.ig_steps},
      {"rule", d.rule.kind == SelectionRule::Kind::kTopK ? "top_k" : "threshold"},
      {"top_k", d.rule.top_k},
      {"threshold", d.rule.threshold},
      {"absolute", d.rule.absolute},
      {"min_score", d.rule.min_score},
      {"embedding_dim", d.family.embedding_dim},
      {"ngram_order", d.family.ngram_order},
      {"epochs", d.train.max_epochs},
      {"batch_size", d.train.batch_size},
      {"learning_rate", d.train.optimizer.learning_rate},
  };
  j["infill"] = {{"alpha", c.infill.alpha}, {"max_span", c.infill.max_span}, {"reuse_original", c.reuse_original}};
  const TrainConfig& t = c.evaluator_train;
  j["evaluator"] = {
      {"embedding_dim", c.evaluator.embedding_dim},
      {"ngram_order", c.evaluator.ngram_order},
      {"bigram_buckets", c.evaluator.bigram_buckets},
      {"epochs", t.max_epochs},
      {"patience", t.patience},
      {"batch_size", t.batch_size},
      {"learning_rate", t.optimizer.learning_rate},
      {"weight_decay", t.optimizer.weight_decay},
      {"optimizer", OptimizerName(t.optimizer.kind)},
  };
  j["irm"] = {{"lambda", c.irm.lambda}, {"penalty_batch", c.irm.penalty_batch}};
  j["scoring"] = {{"bootstrap", c.bootstrap_resamples}, {"bits", c.bits}, {"las_margin", c.las_margin}};
  return j;
}

// ---- vocabulary persistence ----

std::string VocabJson(const Vocabulary& v, const std::vector<std::string>& labels, const std::string& fp) {
  Json j;
  j["fingerprint"] = fp;
  j["tool_version"] = ToolVersion();
  j["num_sentinels"] = v.num_sentinels();
  j["labels"] = labels;
  std::vector<std::string> tokens;
  for (int i = 0; i < v.size(); ++i) tokens.push_back(v.Token(i));
  j["tokens"] = tokens;
  return j.dump() + "\n";
}

Vocabulary ParseVocab(const std::string& text) {
  const Json j = Json::parse(text);
  Vocabulary v(j.at("num_sentinels").get<int>(), j.at("labels").get<std::vector<std::string>>());
  const auto tokens = j.at("tokens").get<std::vector<std::string>>();
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (v.Add(tokens[i]) != static_cast<TokenId>(i)) throw DataError("vocabulary file is inconsistent");
  }
  return v;
}

// ---- shared stage helpers ----

bool StageCurrent(const RunConfig& c, const std::string& stage) {
  const std::string stamp = Path(c, stage + "/STAMP");
  return FileExists(stamp) && ReadFile(stamp) == c.Fingerprint() + "\n";
}

void Stamp(const RunConfig& c, const std::string& stage, StageOutcome& out) {
  WriteFileAtomic(Path(c, stage + "/STAMP"), c.Fingerprint() + "\n");
  out.written.push_back(Path(c, stage + "/STAMP"));
}

void Write(const std::string& path, std::string_view contents, StageOutcome& out) {
  WriteFileAtomic(path, contents);
  out.written.push_back(path);
}

std::string Header(const RunConfig& c) {
  return "# rateval " + ToolVersion() + " fingerprint=" + c.Fingerprint() + "\n";
}

std::string SafeKey(std::string key) {
  for (char& ch : key) {
    if (ch == '/') ch = '@';
  }
  return key;
}

std::vector<std::string> FixedLabels(const RunConfig& c) {
  return c.synthetic ? BenchmarkLabels() : c.labels;
}

void StampDataset(Dataset& d, const RunConfig& c) {
  d.provenance["fingerprint"] = c.Fingerprint();
  d.provenance["tool_version"] = ToolVersion();
  d.provenance["split"] = std::string(SplitTagName(d.split));
}

Dataset LoadSplit(const std::string& path, const std::vector<std::string>& labels, SplitTag tag,
                  const Vocabulary& vocab) {
  Dataset d = LoadJsonl(path, labels.empty() ? nullptr : &labels);
  d.split = tag;
  d.provenance.clear();
  EncodeDataset(d, vocab);
  return d;
}

// data/ holds the splits, the vocabulary and (synthetic runs) the oracle.
PipelineData MaterializeData(const RunConfig& c, StageOutcome* out) {
  if (!StageCurrent(c, "data")) {
    StageOutcome local;
    StageOutcome& o = out ? *out : local;
    PipelineData data = PrepareData(c);
    for (Dataset* d : {&data.train, &data.val, &data.test}) {
      Dataset copy = *d;
      StampDataset(copy, c);
      Write(Path(c, "data/" + std::string(SplitTagName(d->split)) + ".jsonl"), SerializeJsonl(copy), o);
    }
    Write(Path(c, "data/vocab.json"), VocabJson(data.vocab, FixedLabels(c), c.Fingerprint()), o);
    if (data.oracle) {
      GeneratedBenchmark view;
      view.oracle = *data.oracle;
      view.leaked_ids = data.leaked_ids;
      view.variants = c.variants;
      Json side = Json::parse(OracleSidecarJson(view));
      side["fingerprint"] = c.Fingerprint();
      side["tool_version"] = ToolVersion();
      Write(Path(c, "data/oracle.json"), side.dump(2) + "\n", o);
    }
    Stamp(c, "data", o);
    return data;
  }
  PipelineData data;
  data.vocab = ParseVocab(ReadFile(Path(c, "data/vocab.json")));
  const auto labels = FixedLabels(c);
  data.train = LoadSplit(Path(c, "data/train.jsonl"), labels, SplitTag::kTrain, data.vocab);
  data.val = LoadSplit(Path(c, "data/val.jsonl"), labels, SplitTag::kVal, data.vocab);
  data.test = LoadSplit(Path(c, "data/test.jsonl"), labels, SplitTag::kTest, data.vocab);
  return data;
}

FamilyConfig EvaluatorFamily(const RunConfig& c, const Dataset& d) {
  FamilyConfig f = c.evaluator;
  if (d.label_space.mode == LabelMode::kPerInstance) f.architecture = Architecture::kBiEncoder;
  return f;
}

EnvironmentExamples ToExamples(const std::vector<Environment>& envs, const std::string& variant) {
  EnvironmentExamples out;
  for (const Environment& e : envs) out.push_back(BuildExamples(e.data, Conditioning::QuestionRationale(), variant));
  return out;
}

struct Augmented {
  Infiller infiller;
  LeakSelection val_selection;
  std::vector<Environment> train_envs, val_envs;
};

Augmented Augment(const RunConfig& c, const PipelineData& data, const std::string& variant,
                  const LeakSelection& train_selection) {
  Augmented a;
  a.val_selection = ApplySelection(train_selection, data.val, variant);
  const MaskedCorpus masked = BuildMaskedExamples(data.train, variant, train_selection, data.vocab);
  InfillerConfig ic = c.infill;
  ic.seed = StageSeed(c, "augment/" + variant);
  a.infiller = masked.examples.empty() ? Infiller(ic) : TrainInfiller(masked.examples, ic);
  a.train_envs = GenerateEnvironments(data.train, variant, train_selection, a.infiller, data.vocab, c.reuse_original);
  a.val_envs = GenerateEnvironments(data.val, variant, a.val_selection, a.infiller, data.vocab, c.reuse_original);
  return a;
}

TrainedPredictor TrainPhi(const RunConfig& c, const PipelineData& data, const std::string& variant,
                          const std::vector<Environment>& train_envs, const std::vector<Environment>& val_envs,
                          std::vector<IrmEpochLog>* log) {
  IrmConfig irm = c.irm;
  irm.train = c.evaluator_train;
  irm.train.seed = StageSeed(c, "train/phi/" + variant);
  return TrainInvariant(EvaluatorFamily(c, data.train), data.vocab.size(), std::max(2, NumFixedLabels(data.train)),
                        ToExamples(train_envs, variant), ToExamples(val_envs, variant), irm, log);
}

DetectionResult Detect(const RunConfig& c, const PipelineData& data, const std::string& variant) {
  DetectionConfig dc = c.detection;
  dc.train.seed = StageSeed(c, "detect/" + variant);
  return DetectLeaks(data.train, data.val, variant, data.vocab, dc);
}

// Reports in config order: metric-major, variant-minor.
std::vector<ScoreReport> ScoreAll(const RunConfig& c, MetricSuite& suite,
                                  const std::map<std::string, TrainedPredictor>& phis) {
  std::vector<ScoreReport> reports;
  for (MetricKind m : c.metrics) {
    for (const std::string& v : c.variants) {
      if (m == MetricKind::kInvariant) {
        reports.push_back(suite.Invariant(phis.at(v), v));
      } else {
        reports.push_back(suite.Run(m, v));
      }
    }
  }
  return reports;
}

bool WantsInvariant(const RunConfig& c) {
  return std::find(c.metrics.begin(), c.metrics.end(), MetricKind::kInvariant) != c.metrics.end();
}

std::vector<std::string> SuiteModelKeys(const RunConfig& c) {
  std::vector<std::string> keys;
  for (MetricKind m : c.metrics) {
    for (const std::string& v : c.variants) {
      for (const std::string& k : MetricSuite::RequiredModels(m, v)) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
      }
    }
  }
  return keys;
}

void WriteReports(const RunConfig& c, const std::string& dir, const std::vector<ScoreReport>& reports,
                  StageOutcome& out) {
  Write(Path(c, dir + "/report.tsv"), Header(c) + ReportsTsv(reports), out);
  Write(Path(c, dir + "/report.json"), ReportsJson(reports, c.Fingerprint(), ToolVersion()), out);
  Write(Path(c, dir + "/report.md"), ReportsMarkdown(reports) + "\n" + Header(c), out);
}

std::string CheckpointWithStamp(const TrainedPredictor& p, const RunConfig& c) {
  Json j = Json::parse(SerializeCheckpoint(p));
  j["fingerprint"] = c.Fingerprint();
  j["tool_version"] = ToolVersion();
  return j.dump();
}

}  // namespace

std::string ToolVersion() { return RATEVAL_VERSION; }

std::string RunConfig::CanonicalJson() const { return ToJson(*this, false).dump(); }

std::string RunConfig::Fingerprint() const { return Hex(Fnv1a64(CanonicalJson() + "|" + ToolVersion())); }

RunConfig DefaultRunConfig() {
  RunConfig c;
  c.evaluator_train.max_epochs = 20;
  c.evaluator_train.patience = 20;
  c.evaluator_train.batch_size = 64;
  c.evaluator_train.optimizer.learning_rate = 0.1;
  c.irm.train = c.evaluator_train;
  return c;
}

RunConfig ParseRunConfig(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = DefaultRunConfig();
  try {
    CheckKeys(j, {"seed", "out", "data", "variants", "metrics", "detection", "infill", "evaluator", "irm", "scoring"},
              "config");
    Take(j, "seed", c.seed);
    Take(j, "out", c.out_dir);
    if (j.contains("data")) {
      const Json& d = j["data"];
      CheckKeys(d, {"synthetic", "dir", "labels", "min_count"}, "data");
      if (d.contains("dir")) {
        c.synthetic.reset();
        c.data_dir = d["dir"].get<std::string>();
        Take(d, "labels", c.labels);
      }
      if (d.contains("synthetic")) {
        if (d.contains("dir")) throw ConfigError("data needs either 'synthetic' or 'dir', not both");
        Json spec = d["synthetic"];
        if (spec.contains("seed")) throw ConfigError("the synthetic seed derives from the master seed");
        c.synthetic = SpecFromJson(spec.dump());
      }
      Take(d, "min_count", c.min_count);
    }
    Take(j, "variants", c.variants);
    if (j.contains("metrics")) {
      c.metrics.clear();
      for (const auto& m : j["metrics"]) c.metrics.push_back(MetricFromName(m.get<std::string>()));
    }
    if (j.contains("detection")) {
      const Json& d = j["detection"];
      CheckKeys(d, {"ig_steps", "rule", "top_k", "threshold", "absolute", "min_score", "embedding_dim",
                    "ngram_order", "epochs", "batch_size", "learning_rate"},
                "detection");
      DetectionConfig& dc = c.detection;
      Take(d, "ig_steps", dc.ig_steps);
      if (d.contains("rule")) {
        const std::string r = d["rule"].get<std::string>();
        if (r == "top_k") dc.rule.kind = SelectionRule::Kind::kTopK;
        else if (r == "threshold") dc.rule.kind = SelectionRule::Kind::kThreshold;
        else throw ConfigError("unknown selection rule '" + r + "'");
      }
      Take(d, "top_k", dc.rule.top_k);
      Take(d, "threshold", dc.rule.threshold);
      Take(d, "absolute", dc.rule.absolute);
      Take(d, "min_score", dc.rule.min_score);
      Take(d, "embedding_dim", dc.family.embedding_dim);
      Take(d, "ngram_order", dc.family.ngram_order);
      Take(d, "epochs", dc.train.max_epochs);
      Take(d, "batch_size", dc.train.batch_size);
      Take(d, "learning_rate", dc.train.optimizer.learning_rate);
    }
    if (j.contains("infill")) {
      const Json& d = j["infill"];
      CheckKeys(d, {"alpha", "max_span", "reuse_original"}, "infill");
      Take(d, "alpha", c.infill.alpha);
      Take(d, "max_span", c.infill.max_span);
      Take(d, "reuse_original", c.reuse_original);
    }
    if (j.contains("evaluator")) {
      const Json& d = j["evaluator"];
      CheckKeys(d, {"embedding_dim", "ngram_order", "bigram_buckets", "epochs", "patience", "batch_size",
                    "learning_rate", "weight_decay", "optimizer"},
                "evaluator");
      Take(d, "embedding_dim", c.evaluator.embedding_dim);
      Take(d, "ngram_order", c.evaluator.ngram_order);
      Take(d, "bigram_buckets", c.evaluator.bigram_buckets);
      TrainConfig& t = c.evaluator_train;
      Take(d, "epochs", t.max_epochs);
      Take(d, "patience", t.patience);
      Take(d, "batch_size", t.batch_size);
      Take(d, "learning_rate", t.optimizer.learning_rate);
      Take(d, "weight_decay", t.optimizer.weight_decay);
      if (d.contains("optimizer")) t.optimizer.kind = OptimizerFromName(d["optimizer"].get<std::string>());
    }
    if (j.contains("irm")) {
      const Json& d = j["irm"];
      CheckKeys(d, {"lambda", "penalty_batch"}, "irm");
      Take(d, "lambda", c.irm.lambda);
      Take(d, "penalty_batch", c.irm.penalty_batch);
    }
    if (j.contains("scoring")) {
      const Json& d = j["scoring"];
      CheckKeys(d, {"bootstrap", "bits", "las_margin"}, "scoring");
      Take(d, "bootstrap", c.bootstrap_resamples);
      Take(d, "bits", c.bits);
      Take(d, "las_margin", c.las_margin);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  if (c.variants.empty()) throw ConfigError("config lists no variants");
  if (c.metrics.empty()) throw ConfigError("config lists no metrics");
  if (c.irm.lambda < 0) throw ConfigError("lambda must be >= 0");
  if (c.detection.ig_steps < 1) throw ConfigError("ig_steps must be >= 1");
  if (c.bootstrap_resamples < 1) throw ConfigError("bootstrap must be >= 1");
  if (!c.synthetic && c.data_dir.empty()) throw ConfigError("data.dir is empty");
  return c;
}

std::string RunConfigToJson(const RunConfig& config) { return ToJson(config, true).dump(2) + "\n"; }

uint64_t StageSeed(const RunConfig& config, const std::string& stage) { return DeriveSeed(config.seed, stage); }

PipelineData PrepareData(const RunConfig& config) {
  PipelineData data;
  std::vector<std::string> labels;
  if (config.synthetic) {
    SyntheticSpec spec = *config.synthetic;
    spec.seed = StageSeed(config, "gen");
    GeneratedBenchmark bench = Generate(spec);
    data.train = std::move(bench.train);
    data.val = std::move(bench.val);
    data.test = std::move(bench.test);
    data.oracle = std::move(bench.oracle);
    data.leaked_ids = std::move(bench.leaked_ids);
  } else {
    const std::vector<std::string>* fixed = config.labels.empty() ? nullptr : &config.labels;
    const fs::path dir(config.data_dir);
    data.train = LoadJsonl((dir / "train.jsonl").string(), fixed);
    std::vector<std::string> inferred = data.train.label_space.labels;
    const std::vector<std::string>* shared = fixed ? fixed : (inferred.empty() ? nullptr : &inferred);
    data.val = LoadJsonl((dir / "val.jsonl").string(), shared);
    data.test = LoadJsonl((dir / "test.jsonl").string(), shared);
    data.train.split = SplitTag::kTrain;
    data.val.split = SplitTag::kVal;
    data.test.split = SplitTag::kTest;
  }
  data.vocab = BuildVocab({&data.train, &data.val, &data.test}, config.min_count);
  for (Dataset* d : {&data.train, &data.val, &data.test}) {
    d->provenance.clear();
    EncodeDataset(*d, data.vocab);
  }
  return data;
}

VariantRun TrainFromSelection(const RunConfig& config, const PipelineData& data, const std::string& variant,
                              DetectionResult detection) {
  VariantRun run;
  Augmented a = Augment(config, data, variant, detection.selection);
  run.detection = std::move(detection);
  run.val_selection = std::move(a.val_selection);
  run.infiller = std::move(a.infiller);
  run.train_envs = std::move(a.train_envs);
  run.val_envs = std::move(a.val_envs);
  run.phi = TrainPhi(config, data, variant, run.train_envs, run.val_envs, &run.log);
  return run;
}

VariantRun RunVariant(const RunConfig& config, const PipelineData& data, const std::string& variant) {
  return TrainFromSelection(config, data, variant, Detect(config, data, variant));
}

TrainedPredictor TrainQuestionBaseline(const RunConfig& config, const PipelineData& data) {
  TrainConfig tc = config.evaluator_train;
  tc.seed = StageSeed(config, "train/theta");
  return TrainBaseline(data.train, data.val, config.evaluator, data.vocab.size(), tc);
}

ScoringConfig MakeScoringConfig(const RunConfig& config) {
  ScoringConfig s;
  s.family = config.evaluator;
  s.train = config.evaluator_train;
  s.bootstrap_resamples = config.bootstrap_resamples;
  s.seed = StageSeed(config, "score");
  s.bits = config.bits;
  s.las_margin = config.las_margin;
  s.fingerprint = config.Fingerprint();
  return s;
}

std::vector<ScoreReport> RunAll(const RunConfig& config, const PipelineData& data) {
  MetricSuite suite(&data.train, &data.val, data.test, data.vocab.size(), MakeScoringConfig(config));
  suite.Preload(MetricSuite::ModelKey(Conditioning::Question(), ""), TrainQuestionBaseline(config, data));
  std::map<std::string, TrainedPredictor> phis;
  if (WantsInvariant(config)) {
    for (const std::string& v : config.variants) phis[v] = RunVariant(config, data, v).phi;
  }
  return ScoreAll(config, suite, phis);
}

MaskingDemoResult RunMaskingDemo(const RunConfig& config, const PipelineData& data, const std::string& variant) {
  MaskingDemoResult out;
  const ScoringConfig sc = MakeScoringConfig(config);
  MetricSuite suite(&data.train, &data.val, data.test, data.vocab.size(), sc);
  suite.Preload(MetricSuite::ModelKey(Conditioning::Question(), ""), TrainQuestionBaseline(config, data));

  VariantRun full = RunVariant(config, data, variant);
  ScoreReport a = suite.Invariant(full.phi, variant);

  const std::vector<Environment> train_envs = {
      Environment{-1, "original", data.train},
      BuildMaskEnvironment(data.train, variant, full.detection.selection, data.vocab)};
  const std::vector<Environment> val_envs = {
      Environment{-1, "original", data.val},
      BuildMaskEnvironment(data.val, variant, full.val_selection, data.vocab)};
  IrmConfig irm = config.irm;
  irm.train = config.evaluator_train;
  irm.train.seed = StageSeed(config, "demo/mask-irm/" + variant);
  const TrainedPredictor masked =
      TrainInvariant(EvaluatorFamily(config, data.train), data.vocab.size(), std::max(2, NumFixedLabels(data.train)),
                     ToExamples(train_envs, variant), ToExamples(val_envs, variant), irm);
  ScoreReport b = suite.Invariant(masked, variant);
  ScoreReport c = suite.Ablation(variant);

  out.counterfactual_irm = a.mean;
  out.masked_irm = b.mean;
  out.plain_erm = c.mean;
  a.variant = variant + "/counterfactual-irm";
  b.variant = variant + "/mask-irm";
  c.variant = variant + "/erm";
  c.metric = MetricKind::kInvariant;
  out.reports = {a, b, c};
  return out;
}

// ---- file-backed stages ----

StageOutcome CmdGen(const SyntheticSpec& spec, const std::string& out_dir) {
  StageOutcome out;
  GeneratedBenchmark bench = Generate(spec);
  const std::string fp = Hex(Fnv1a64(SpecToJson(spec) + "|" + ToolVersion()));
  for (Dataset* d : {&bench.train, &bench.val, &bench.test}) {
    d->provenance = {{"fingerprint", fp}, {"tool_version", ToolVersion()}, {"split", std::string(SplitTagName(d->split))}};
    Write((fs::path(out_dir) / (std::string(SplitTagName(d->split)) + ".jsonl")).string(), SerializeJsonl(*d), out);
  }
  Json side = Json::parse(OracleSidecarJson(bench));
  side["fingerprint"] = fp;
  side["tool_version"] = ToolVersion();
  Write((fs::path(out_dir) / "oracle.json").string(), side.dump(2) + "\n", out);
  return out;
}

StageOutcome CmdDetect(const RunConfig& config) {
  StageOutcome out;
  if (StageCurrent(config, "detect")) {
    out.skipped = true;
    return out;
  }
  const PipelineData data = MaterializeData(config, &out);
  for (const std::string& v : config.variants) {
    const DetectionResult det = Detect(config, data, v);
    const std::string dir = "detect/" + v;
    Json head;
    head["provenance"] = {{"fingerprint", config.Fingerprint()}, {"tool_version", ToolVersion()}, {"variant", v}};
    Write(Path(config, dir + "/attributions.jsonl"), head.dump() + "\n" + AttributionDumpJsonl(det.maps, data.vocab), out);
    Write(Path(config, dir + "/global.tsv"), Header(config) + GlobalAttributionTsv(det.global, data.vocab), out);
    std::vector<std::string> types;
    for (TokenId t : det.selection.types) types.push_back(data.vocab.Token(t));
    Json masks_head;
    masks_head["fingerprint"] = config.Fingerprint();
    masks_head["tool_version"] = ToolVersion();
    masks_head["rule"] = det.selection.rule.Describe();
    masks_head["types"] = types;
    std::string body = masks_head.dump() + "\n";
    const LeakSelection val_sel = ApplySelection(det.selection, data.val, v);
    for (const auto& [split, sel] : {std::pair<const char*, const LeakSelection*>{"train", &det.selection},
                                     std::pair<const char*, const LeakSelection*>{"val", &val_sel}}) {
      for (const LeakMask& m : sel->masks) {
        Json line;
        line["split"] = split;
        line["id"] = m.id;
        Json spans = Json::array();
        for (const MaskSpan& s : m.spans) spans.push_back({s.start, s.length});
        line["spans"] = spans;
        body += line.dump() + "\n";
      }
    }
    Write(Path(config, dir + "/masks.jsonl"), body, out);
  }
  Stamp(config, "detect", out);
  return out;
}

namespace {

LeakSelection LoadSelection(const RunConfig& c, const PipelineData& data, const std::string& variant) {
  const std::string path = Path(c, "detect/" + variant + "/masks.jsonl");
  if (!FileExists(path)) throw DataError("missing " + path + "; run detect first");
  std::istringstream in(ReadFile(path));
  std::string first;
  std::getline(in, first);
  const Json head = Json::parse(first);
  if (head.at("fingerprint") != c.Fingerprint()) throw DataError(path + " was produced by another configuration");
  LeakSelection sel;
  sel.rule = c.detection.rule;
  for (const auto& t : head.at("types")) {
    const TokenId id = data.vocab.Lookup(t.get<std::string>());
    if (id == Vocabulary::kUnk && t.get<std::string>() != "<unk>") throw DataError("unknown token in " + path);
    sel.types.insert(id);
  }
  return ApplySelection(sel, data.train, variant);
}

std::vector<Environment> LoadEnvironments(const RunConfig& c, const PipelineData& data, const std::string& variant,
                                          const std::string& split) {
  std::vector<Environment> envs;
  const auto labels = FixedLabels(c);
  for (int e = 0;; ++e) {
    const std::string path = Path(c, "augment/" + variant + "/env-" + std::to_string(e) + "-" + split + ".jsonl");
    if (!FileExists(path)) break;
    Environment env;
    env.label_value = e;
    env.data = LoadJsonl(path, labels.empty() ? nullptr : &labels);
    if (env.data.provenance["fingerprint"] != c.Fingerprint()) {
      throw DataError(path + " was produced by another configuration");
    }
    env.label_text = env.data.provenance["environment"];
    env.data.provenance.clear();
    EncodeDataset(env.data, data.vocab);
    envs.push_back(std::move(env));
  }
  if (envs.empty()) throw DataError("no environments for '" + variant + "'; run augment first");
  return envs;
}

}  // namespace

StageOutcome CmdAugment(const RunConfig& config) {
  StageOutcome out;
  if (StageCurrent(config, "augment")) {
    out.skipped = true;
    return out;
  }
  const PipelineData data = MaterializeData(config, &out);
  for (const std::string& v : config.variants) {
    const LeakSelection sel = LoadSelection(config, data, v);
    Augmented a = Augment(config, data, v, sel);
    for (auto* envs : {&a.train_envs, &a.val_envs}) {
      const std::string split = envs == &a.train_envs ? "train" : "val";
      for (Environment& env : *envs) {
        env.data.provenance["fingerprint"] = config.Fingerprint();
        env.data.provenance["tool_version"] = ToolVersion();
        Write(Path(config, "augment/" + v + "/env-" + std::to_string(env.label_value) + "-" + split + ".jsonl"),
              SerializeJsonl(env.data), out);
      }
    }
  }
  Stamp(config, "augment", out);
  return out;
}

StageOutcome CmdTrain(const RunConfig& config) {
  StageOutcome out;
  if (StageCurrent(config, "train")) {
    out.skipped = true;
    return out;
  }
  const PipelineData data = MaterializeData(config, &out);
  MetricSuite suite(&data.train, &data.val, data.test, data.vocab.size(), MakeScoringConfig(config));
  suite.Preload(MetricSuite::ModelKey(Conditioning::Question(), ""), TrainQuestionBaseline(config, data));
  for (const std::string& key : SuiteModelKeys(config)) suite.Model(key);
  for (const auto& [key, model] : suite.models()) {
    Write(Path(config, "train/models/" + SafeKey(key) + ".json"), CheckpointWithStamp(model, config), out);
  }
  if (WantsInvariant(config)) {
    for (const std::string& v : config.variants) {
      std::vector<IrmEpochLog> log;
      const TrainedPredictor phi =
          TrainPhi(config, data, v, LoadEnvironments(config, data, v, "train"), LoadEnvironments(config, data, v, "val"), &log);
      Write(Path(config, "train/phi/" + v + ".json"), CheckpointWithStamp(phi, config), out);
      Json head;
      head["fingerprint"] = config.Fingerprint();
      head["tool_version"] = ToolVersion();
      Write(Path(config, "train/logs/" + v + ".jsonl"), head.dump() + "\n" + IrmLogJsonl(log), out);
    }
  }
  Stamp(config, "train", out);
  return out;
}

StageOutcome CmdScore(const RunConfig& config) {
  StageOutcome out;
  if (StageCurrent(config, "score")) {
    out.skipped = true;
    return out;
  }
  // Only the vocabulary, the test split and checkpoints are read here.
  const Vocabulary vocab = ParseVocab(ReadFile(Path(config, "data/vocab.json")));
  const Dataset test = LoadSplit(Path(config, "data/test.jsonl"), FixedLabels(config), SplitTag::kTest, vocab);
  auto load = [&](const std::string& path) {
    if (!FileExists(path)) throw DataError("missing checkpoint " + path + "; run train first");
    const std::string text = ReadFile(path);
    if (Json::parse(text).value("fingerprint", "") != config.Fingerprint()) {
      throw DataError(path + " was produced by another configuration");
    }
    return ParseCheckpoint(text);
  };
  MetricSuite suite(nullptr, nullptr, test, vocab.size(), MakeScoringConfig(config));
  for (const std::string& key : SuiteModelKeys(config)) {
    suite.Preload(key, load(Path(config, "train/models/" + SafeKey(key) + ".json")));
  }
  std::map<std::string, TrainedPredictor> phis;
  if (WantsInvariant(config)) {
    for (const std::string& v : config.variants) phis[v] = load(Path(config, "train/phi/" + v + ".json"));
  }
  WriteReports(config, "score", ScoreAll(config, suite, phis), out);
  Stamp(config, "score", out);
  return out;
}

StageOutcome CmdSweep(const RunConfig& config, SweepAxis axis, const std::vector<double>& values) {
  StageOutcome out;
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const std::string axis_name = axis == SweepAxis::kLambda ? "lambda" : "threshold";
  const std::string stage = "sweep-" + axis_name;
  // The sweep stamp covers the value list too.
  std::string value_list;
  for (double v : values) value_list += FormatDouble(v, 9) + ",";
  const std::string stamp_text = config.Fingerprint() + "|" + value_list + "\n";
  const std::string stamp = Path(config, stage + "/STAMP");
  if (FileExists(stamp) && ReadFile(stamp) == stamp_text) {
    out.skipped = true;
    return out;
  }
  const PipelineData data = PrepareData(config);
  MetricSuite suite(&data.train, &data.val, data.test, data.vocab.size(), MakeScoringConfig(config));
  suite.Preload(MetricSuite::ModelKey(Conditioning::Question(), ""), TrainQuestionBaseline(config, data));

  std::map<std::string, DetectionResult> detections;
  std::map<std::string, Augmented> augmented;
  for (const std::string& v : config.variants) {
    detections[v] = Detect(config, data, v);
    if (axis == SweepAxis::kLambda) augmented.emplace(v, Augment(config, data, v, detections[v].selection));
  }

  std::string tidy = Header(config) + "axis\tvalue\tmetric\tvariant\tmean\tci_lo\tci_hi\tn\tselected\n";
  for (double value : values) {
    RunConfig cell = config;
    if (axis == SweepAxis::kLambda) {
      cell.irm.lambda = value;
    } else {
      cell.detection.rule.kind = SelectionRule::Kind::kThreshold;
      cell.detection.rule.threshold = value;
    }
    std::vector<ScoreReport> reports;
    std::map<std::string, size_t> selected;
    for (const std::string& v : config.variants) {
      TrainedPredictor phi;
      if (axis == SweepAxis::kLambda) {
        const Augmented& a = augmented.at(v);
        phi = TrainPhi(cell, data, v, a.train_envs, a.val_envs, nullptr);
        selected[v] = detections.at(v).selection.types.size();
      } else {
        DetectionResult det = detections.at(v);
        det.selection = SelectLeaks(det.global, cell.detection.rule, data.train, v);
        selected[v] = det.selection.types.size();
        phi = TrainFromSelection(cell, data, v, std::move(det)).phi;
      }
      ScoreReport r = suite.Invariant(phi, v);
      r.fingerprint = cell.Fingerprint();
      reports.push_back(std::move(r));
    }
    const std::string cell_dir = stage + "/" + FormatDouble(value, 6);
    WriteReports(cell, cell_dir, reports, out);
    for (const ScoreReport& r : reports) {
      tidy += axis_name + "\t" + FormatDouble(value, 6) + "\t" + MetricName(r.metric) + "\t" + r.variant + "\t" +
              FormatDouble(r.mean) + "\t" + FormatDouble(r.ci.lo) + "\t" + FormatDouble(r.ci.hi) + "\t" +
              std::to_string(r.n) + "\t" + std::to_string(selected[r.variant]) + "\n";
    }
  }
  Write(Path(config, stage + "/plot.tsv"), tidy, out);
  WriteFileAtomic(stamp, stamp_text);
  out.written.push_back(stamp);
  return out;
}

StageOutcome CmdMaskingDemo(const RunConfig& config) {
  StageOutcome out;
  if (StageCurrent(config, "demo")) {
    out.skipped = true;
    return out;
  }
  const PipelineData data = PrepareData(config);
  const MaskingDemoResult r = RunMaskingDemo(config, data);
  WriteReports(config, "demo", r.reports, out);
  Stamp(config, "demo", out);
  return out;
}

StageOutcome CmdReport(const std::string& run_dir) {
  StageOutcome out;
  if (!fs::is_directory(run_dir)) throw DataError("not a directory: " + run_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(run_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "report.json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no report.json found under " + run_dir);
  std::string tsv = "run\tmetric\tvariant\tmean\tci_lo\tci_hi\tn\n";
  std::string md;
  for (const fs::path& f : files) {
    const std::string run = fs::relative(f.parent_path(), run_dir).generic_string();
    const std::vector<ScoreReport> reports = ParseReportsJson(ReadFile(f.string()));
    for (const ScoreReport& r : reports) {
      tsv += run + "\t" + MetricName(r.metric) + "\t" + r.variant + "\t" + FormatDouble(r.mean) + "\t" +
             FormatDouble(r.ci.lo) + "\t" + FormatDouble(r.ci.hi) + "\t" + std::to_string(r.n) + "\n";
    }
    md += "## " + run + "\n\n" + ReportsMarkdown(reports) + "\n";
  }
  Write((fs::path(run_dir) / "summary.tsv").string(), tsv, out);
  Write((fs::path(run_dir) / "summary.md").string(), md, out);
  return out;
}

}  // namespace rateval
