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

#include <cmath>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "rateval/errors.h"
#include "rateval/irm.h"
#include "rateval/model.h"
#include "rateval/random.h"
#include "test_support.h"

namespace rateval {
namespace {

// Independent oracle: central difference of CE(w z, y) in w at w = 1.
double ScaleGradientFd(const std::vector<double>& z, int y, double h = 1e-4) {
  auto ce = [&](double w) {
    std::vector<double> s = z;
    for (double& v : s) v *= w;
    return CrossEntropyGrad(s, y).loss;
  };
  return (ce(1 + h) - ce(1 - h)) / (2 * h);
}

TEST(IrmPenaltyTest, WorkedExample) {
  const std::vector<double> z{1.0, -1.0};
  const double fd = ScaleGradientFd(z, 0);
  EXPECT_NEAR(fd, -0.23840, 1e-5);  // printed value is truncated
  EXPECT_NEAR(IrmScaleGradient(z, 0), fd, 1e-8);
  const PenaltyAndGrad p = IrmPenalty(z, 0);
  EXPECT_NEAR(p.penalty, fd * fd, 1e-8);
  EXPECT_NEAR(p.penalty, 0.056835, 5e-6);
}

TEST(IrmPenaltyTest, MatchesFiniteDifferenceOnRandomInputs) {
  Rng rng(2024);
  const double h = 1e-5;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.Below(4));
    std::vector<double> z(static_cast<size_t>(n));
    for (double& v : z) v = rng.Uniform(-4, 4);
    const int y = static_cast<int>(rng.Below(static_cast<uint64_t>(n)));
    const PenaltyAndGrad p = IrmPenalty(z, y);
    const double g = ScaleGradientFd(z, y);
    EXPECT_LE(std::abs(p.penalty - g * g), 1e-5 * std::max(1e-3, g * g));
    EXPECT_GE(p.penalty, 0.0);
    for (int k = 0; k < n; ++k) {
      std::vector<double> up = z, dn = z;
      up[static_cast<size_t>(k)] += h;
      dn[static_cast<size_t>(k)] -= h;
      const double fd = (IrmPenalty(up, y).penalty - IrmPenalty(dn, y).penalty) / (2 * h);
      EXPECT_LE(std::abs(p.grad[static_cast<size_t>(k)] - fd), 1e-5 * std::max(1e-2, std::abs(fd)));
    }
  }
}

TEST(IrmPenaltyTest, ZeroCasesAreExact) {
  EXPECT_EQ(IrmPenalty(std::vector<double>{0.0, 0.0}, 1).penalty, 0.0);
  EXPECT_EQ(IrmPenalty(std::vector<double>{0.0, 0.0, 0.0}, 2).penalty, 0.0);
  // Equal logits: z . (p - onehot) = c (sum p - 1) = 0.
  EXPECT_EQ(IrmPenalty(std::vector<double>{2.0, 2.0}, 0).penalty, 0.0);
}

using testing::FeatureWeight;
using testing::kLeak0;
using testing::kStable0;
using testing::kToyVocab;
using testing::ToyConfig;
using testing::ToyEnvs;

TEST(TrainInvariantTest, PenaltySuppressesFlippingFeature) {
  const EnvironmentExamples train = ToyEnvs(400, 1);
  const EnvironmentExamples val = ToyEnvs(400, 2);
  const FamilyConfig f{Architecture::kEmbeddingBag, 4, 1, 16};
  const TrainedPredictor erm = TrainInvariant(f, kToyVocab, 2, train, val, ToyConfig(0.0));
  const TrainedPredictor irm = TrainInvariant(f, kToyVocab, 2, train, val, ToyConfig(10.0));
  const double erm_leak = std::abs(FeatureWeight(erm.model(), kLeak0));
  const double erm_stable = std::abs(FeatureWeight(erm.model(), kStable0));
  const double irm_leak = std::abs(FeatureWeight(irm.model(), kLeak0));
  const double irm_stable = std::abs(FeatureWeight(irm.model(), kStable0));
  EXPECT_GT(erm_leak, erm_stable);
  EXPECT_LT(irm_leak, 0.1 * irm_stable);
}

TEST(TrainInvariantTest, BatchesPairEveryInstanceAcrossEnvironments) {
  const EnvironmentExamples train = ToyEnvs(130, 3);
  const EnvironmentExamples val = ToyEnvs(40, 4);
  IrmConfig c = ToyConfig(1.0);
  c.train.max_epochs = 2;
  c.train.batch_size = 32;
  BatchTrace trace;
  std::vector<IrmEpochLog> log;
  TrainInvariant(FamilyConfig{Architecture::kEmbeddingBag, 4, 1, 16}, kToyVocab, 2, train, val, c, &log,
                 &trace);
  ASSERT_FALSE(trace.empty());
  std::vector<int> seen(130, 0);
  for (const auto& batch : trace) {
    const std::set<size_t> unique(batch.begin(), batch.end());
    EXPECT_EQ(unique.size(), batch.size());
    for (size_t i : batch) ++seen[i];
  }
  for (int count : seen) EXPECT_EQ(count, 2);  // once per epoch
  EXPECT_EQ(log.size(), 2u * 3u);
}

TEST(TrainInvariantTest, LambdaZeroMatchesPooledObjective) {
  // With lambda = 0 the objective is the sum of per-environment risks.
  const EnvironmentExamples envs = ToyEnvs(64, 6);
  auto m = MakeModel(FamilyConfig{Architecture::kEmbeddingBag, 4, 1, 16}, kToyVocab, 2, 3);
  std::vector<size_t> idx(64);
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const IrmObjective obj = EvaluateIrmObjective(*m, envs, idx, 0.0, true);
  double want = 0;
  for (const ExampleSet& env : envs) want += MeanCrossEntropy(*m, env);
  EXPECT_NEAR(obj.total, want, 1e-12);
}

TEST(TrainInvariantTest, InvariantOptimumHasSmallPenalty) {
  // Identical conditional distributions in both environments; after pooled
  // training each environment's penalty vanishes.
  EnvironmentExamples envs = ToyEnvs(400, 8);
  envs.resize(2);
  envs[1] = envs[0];
  const EnvironmentExamples val = envs;
  IrmConfig c = ToyConfig(0.0);
  c.train.max_epochs = 200;
  c.train.patience = 200;
  const TrainedPredictor p =
      TrainInvariant(FamilyConfig{Architecture::kEmbeddingBag, 4, 1, 16}, kToyVocab, 2, envs, val, c);
  std::vector<size_t> idx(400);
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const IrmObjective obj = EvaluateIrmObjective(p.model(), envs, idx, 1.0, true);
  for (double pen : obj.penalty) EXPECT_LE(pen, 1e-3);
}

TEST(TrainInvariantTest, DeterministicUnderSeed) {
  const EnvironmentExamples train = ToyEnvs(100, 1);
  const EnvironmentExamples val = ToyEnvs(50, 2);
  IrmConfig c = ToyConfig(10.0);
  c.train.max_epochs = 5;
  const FamilyConfig f{Architecture::kEmbeddingBag, 4, 1, 16};
  const TrainedPredictor a = TrainInvariant(f, kToyVocab, 2, train, val, c);
  const TrainedPredictor b = TrainInvariant(f, kToyVocab, 2, train, val, c);
  EXPECT_EQ(SerializeCheckpoint(a), SerializeCheckpoint(b));
}

TEST(CheckAlignedTest, RejectsMisalignedEnvironments) {
  EnvironmentExamples envs = ToyEnvs(10, 1);
  EXPECT_NO_THROW(CheckAligned(envs));
  EXPECT_THROW(CheckAligned(EnvironmentExamples{envs[0]}), DataError);
  EnvironmentExamples shorter = envs;
  shorter[1].pop_back();
  EXPECT_THROW(CheckAligned(shorter), DataError);
  EnvironmentExamples relabeled = envs;
  relabeled[2][0].label = 1 - relabeled[2][0].label;
  EXPECT_THROW(CheckAligned(relabeled), DataError);
}

TEST(MaskEnvironmentTest, SpansBecomeSingleUnk) {
  const PipelineData& d = testing::DefaultData();
  LeakSelection sel;
  sel.types = {d.vocab.LabelToken(0), d.vocab.LabelToken(1)};
  sel = ApplySelection(sel, d.train, "leaky");
  const Environment env = BuildMaskEnvironment(d.train, "leaky", sel, d.vocab);
  for (size_t i = 0; i < d.train.size(); ++i) {
    const TokenSeq& r = d.train.instances[i].rationales.at("leaky").tokens;
    const TokenSeq& m = env.data.instances[i].rationales.at("leaky").tokens;
    ASSERT_EQ(m.size(), r.size());
    for (size_t p = 0; p < r.size(); ++p) {
      EXPECT_EQ(m[p], sel.masks[i].selected[p] ? Vocabulary::kUnk : r[p]);
    }
  }
}

}  // namespace
}  // namespace rateval
