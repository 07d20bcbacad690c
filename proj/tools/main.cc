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

// Command-line driver. Precedence: flags > --config file > defaults.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rateval/errors.h"
#include "rateval/io.h"
#include "rateval/pipeline.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

struct Flags {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> variants;
  std::vector<std::string> metrics;
  std::optional<double> lambda;
  std::optional<double> threshold;
  std::optional<int> top_k;
};

void AddCommonFlags(CLI::App* cmd, Flags* f) {
  cmd->add_option("--config", f->config_path, "JSON run configuration");
  cmd->add_option("--seed", f->seed, "Master seed");
  cmd->add_option("--out", f->out, "Output directory");
  cmd->add_option("--variant", f->variants, "Rationale variant (repeatable)");
  cmd->add_option("--metric", f->metrics,
                  "Metric: invariant, ablation, rev, las, rq (repeatable)");
  cmd->add_option("--lambda", f->lambda, "Invariance penalty weight");
  cmd->add_option("--threshold", f->threshold, "Select tokens scoring above this value");
  cmd->add_option("--top-k", f->top_k, "Select the k highest-scoring types per label");
}

rateval::RunConfig ResolveConfig(const Flags& f) {
  rateval::RunConfig c = f.config_path.empty()
                             ? rateval::DefaultRunConfig()
                             : rateval::ParseRunConfig(rateval::ReadFile(f.config_path));
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out_dir = *f.out;
  if (!f.variants.empty()) c.variants = f.variants;
  if (!f.metrics.empty()) {
    c.metrics.clear();
    for (const std::string& m : f.metrics) c.metrics.push_back(rateval::MetricFromName(m));
  }
  if (f.lambda) {
    if (*f.lambda < 0) throw rateval::ConfigError("--lambda must be non-negative");
    c.irm.lambda = *f.lambda;
  }
  if (f.threshold && f.top_k) throw rateval::ConfigError("--threshold and --top-k are exclusive");
  if (f.threshold) {
    c.detection.rule.kind = rateval::SelectionRule::Kind::kThreshold;
    c.detection.rule.threshold = *f.threshold;
  }
  if (f.top_k) {
    if (*f.top_k < 1) throw rateval::ConfigError("--top-k must be at least 1");
    c.detection.rule.kind = rateval::SelectionRule::Kind::kTopK;
    c.detection.rule.top_k = *f.top_k;
  }
  return c;
}

void Print(const std::string& stage, const rateval::StageOutcome& outcome) {
  if (outcome.skipped) {
    std::printf("%s: up to date, skipped\n", stage.c_str());
    return;
  }
  for (const std::string& path : outcome.written) std::printf("%s: wrote %s\n", stage.c_str(), path.c_str());
}

std::vector<double> DefaultSweep(rateval::SweepAxis axis) {
  if (axis == rateval::SweepAxis::kLambda) return {1, 5, 10, 20, 100, 500, 1000};
  return {0.005, 0.01, 1, 4, 8};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rationale informativeness evaluation toolkit"};
  app.set_version_flag("--version", rateval::ToolVersion());
  app.require_subcommand(1);

  Flags flags;
  std::string spec_path;
  std::string axis_name = "lambda";
  std::vector<double> sweep_values;
  std::string run_dir;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic benchmark and its oracle sidecar");
  gen->add_option("--spec", spec_path, "Benchmark spec JSON (defaults when omitted)");
  gen->add_option("--seed", flags.seed, "Overrides the spec seed");
  gen->add_option("--out", flags.out, "Output directory")->required();

  std::vector<std::pair<std::string, CLI::App*>> stages;
  for (const char* name : {"detect", "augment", "train", "score", "demo-appendix-a"}) {
    CLI::App* cmd = app.add_subcommand(name);
    AddCommonFlags(cmd, &flags);
    stages.emplace_back(name, cmd);
  }
  stages[0].second->description("Attribute rationale tokens and select leak spans");
  stages[1].second->description("Write counterfactual environments");
  stages[2].second->description("Train the invariant evaluator and the baselines");
  stages[3].second->description("Score every configured metric and variant");
  stages[4].second->description("Compare masking-based evaluators on the leaky variant");

  CLI::App* sweep = app.add_subcommand("sweep", "Re-run the pipeline over a grid of one parameter");
  AddCommonFlags(sweep, &flags);
  sweep->add_option("--axis", axis_name, "threshold or lambda")
      ->check(CLI::IsMember({"threshold", "lambda"}));
  sweep->add_option("--values", sweep_values, "Grid values");

  CLI::App* report = app.add_subcommand("report", "Summarize every report under a run directory");
  report->add_option("run_dir", run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) {
      rateval::SyntheticSpec spec = spec_path.empty() ? rateval::SyntheticSpec{}
                                                      : rateval::SpecFromJson(rateval::ReadFile(spec_path));
      if (flags.seed) spec.seed = *flags.seed;
      Print("gen", rateval::CmdGen(spec, *flags.out));
      return kExitOk;
    }
    if (report->parsed()) {
      Print("report", rateval::CmdReport(run_dir));
      return kExitOk;
    }
    rateval::RunConfig config = ResolveConfig(flags);
    if (sweep->parsed()) {
      rateval::SweepAxis axis =
          axis_name == "threshold" ? rateval::SweepAxis::kThreshold : rateval::SweepAxis::kLambda;
      if (sweep_values.empty()) sweep_values = DefaultSweep(axis);
      Print("sweep", rateval::CmdSweep(config, axis, sweep_values));
      return kExitOk;
    }
    // Each stage reads the previous stage's artifacts and skips itself when
    // its stamp matches the config fingerprint.
    if (stages[0].second->parsed()) {
      Print("detect", rateval::CmdDetect(config));
    } else if (stages[1].second->parsed()) {
      Print("augment", rateval::CmdAugment(config));
    } else if (stages[2].second->parsed()) {
      Print("train", rateval::CmdTrain(config));
    } else if (stages[3].second->parsed()) {
      Print("score", rateval::CmdScore(config));
    } else {
      Print("demo-appendix-a", rateval::CmdMaskingDemo(config));
    }
    return kExitOk;
  } catch (const rateval::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const rateval::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const rateval::DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return kExitDivergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
