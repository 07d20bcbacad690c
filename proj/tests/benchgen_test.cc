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
#include <functional>
#include <map>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "rateval/benchgen.h"
#include "rateval/corpus.h"
#include "rateval/errors.h"
#include "test_support.h"

namespace rateval {
namespace {

using testing::BinaryEntropy;

// Counting estimate of H(Y | key(i)) over `ds`, independent of the library.
double CountEntropy(const Dataset& ds, const std::function<std::string(const Instance&)>& key) {
  std::map<std::string, std::map<int, double>> counts;
  for (const Instance& inst : ds.instances) counts[key(inst)][inst.label] += 1;
  double h = 0;
  for (const auto& [k, by_label] : counts) {
    double total = 0;
    for (const auto& [l, c] : by_label) total += c;
    for (const auto& [l, c] : by_label) h -= c / ds.size() * std::log(c / total);
  }
  return h;
}

SyntheticSpec Small(LabelRule rule, int reveal) {
  SyntheticSpec s;
  s.label_rule = rule;
  s.reveal_count = reveal;
  s.train_size = 400;
  s.val_size = 200;
  s.test_size = 2000;
  return s;
}

TEST(BenchgenTest, ConjunctionPartialRevealInfo) {
  const GeneratedBenchmark b = Generate(Small(LabelRule::kConjunction, 1));
  const double want = BinaryEntropy(0.25) - 0.5 * BinaryEntropy(0.5);
  EXPECT_NEAR(want, 0.2158, 5e-5);
  EXPECT_NEAR(OracleInfo(b.oracle, "gold"), want, 1e-9);
}

TEST(BenchgenTest, ParityRevealLevels) {
  const GeneratedBenchmark full = Generate(Small(LabelRule::kParity, 2));
  EXPECT_NEAR(OracleInfo(full.oracle, "gold"), std::log(2.0), 1e-9);
  const GeneratedBenchmark partial = Generate(Small(LabelRule::kParity, 1));
  EXPECT_NEAR(OracleInfo(partial.oracle, "gold"), 0.0, 1e-9);
  EXPECT_NEAR(OracleInfo(full.oracle, "distractor"), 0.0, 1e-12);
  // Leak tokens are deleted before keying, so the leaky variant is leak-free.
  EXPECT_NEAR(OracleInfo(full.oracle, "leaky"), 0.0, 1e-9);
  EXPECT_NEAR(OracleInfo(full.oracle, "vacuous"), 0.0, 1e-9);
  EXPECT_NEAR(OracleInfo(full.oracle, "gold_leaky"), std::log(2.0), 1e-9);
}

TEST(BenchgenTest, OracleMatchesIndependentCounts) {
  const GeneratedBenchmark b = Generate(Small(LabelRule::kConjunction, 1));
  const double h_none = CountEntropy(b.test, [](const Instance&) { return std::string(); });
  const double h_q = CountEntropy(b.test, [](const Instance& i) { return i.question; });
  const double h_qr = CountEntropy(
      b.test, [](const Instance& i) { return i.question + "|" + i.rationales.at("gold").text; });
  EXPECT_NEAR(OracleEntropy(b.oracle, "none"), h_none, 1e-12);
  EXPECT_NEAR(OracleEntropy(b.oracle, "question"), h_q, 1e-12);
  EXPECT_NEAR(OracleEntropy(b.oracle, "question+gold"), h_qr, 1e-12);
  EXPECT_THROW(OracleEntropy(b.oracle, "bogus"), ConfigError);
}

TEST(BenchgenTest, QuestionIndependentOfLabel) {
  for (LabelRule rule : {LabelRule::kParity, LabelRule::kConjunction}) {
    const GeneratedBenchmark b = Generate(Small(rule, 2));
    for (const Dataset* ds : {&b.train, &b.val, &b.test}) {
      const double h = CountEntropy(*ds, [](const Instance&) { return std::string(); });
      const double hq = CountEntropy(*ds, [](const Instance& i) { return i.question; });
      EXPECT_NEAR(h - hq, 0.0, 1e-9);
    }
  }
}

TEST(BenchgenTest, OnlyLeakTokensCorrelateWithLabel) {
  SyntheticSpec spec;
  const GeneratedBenchmark b = Generate(spec);
  const Dataset& ds = b.train;
  ASSERT_GE(ds.size(), 2000u);
  std::set<std::string> tokens;
  for (const Instance& inst : ds.instances) {
    for (const std::string& t : Segment(inst.rationales.at("leaky").text)) tokens.insert(t);
  }
  const std::set<std::string> leak{"true", "false"};
  for (const std::string& tok : tokens) {
    // Point-biserial correlation between token presence and label.
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const Instance& inst : ds.instances) {
      const auto seg = Segment(inst.rationales.at("leaky").text);
      const double x = std::count(seg.begin(), seg.end(), tok) > 0 ? 1 : 0;
      const double y = inst.label;
      n += 1, sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
    }
    const double vx = sxx / n - (sx / n) * (sx / n);
    const double vy = syy / n - (sy / n) * (sy / n);
    const double corr = vx <= 0 ? 0.0 : (sxy / n - sx / n * sy / n) / std::sqrt(vx * vy);
    if (leak.count(tok)) {
      EXPECT_GT(std::abs(corr), 0.9) << tok;
    } else {
      EXPECT_LT(std::abs(corr), 0.1) << tok;
    }
  }
}

TEST(BenchgenTest, RegenerationIsByteIdentical) {
  const SyntheticSpec spec = Small(LabelRule::kParity, 2);
  const GeneratedBenchmark a = Generate(spec);
  const GeneratedBenchmark b = Generate(spec);
  EXPECT_EQ(SerializeJsonl(a.train), SerializeJsonl(b.train));
  EXPECT_EQ(SerializeJsonl(a.test), SerializeJsonl(b.test));
  EXPECT_EQ(OracleSidecarJson(a), OracleSidecarJson(b));
  SyntheticSpec other = spec;
  other.seed = 99;
  EXPECT_NE(SerializeJsonl(Generate(other).train), SerializeJsonl(a.train));
}

TEST(BenchgenTest, LeakRateControlsPlantedLeaks) {
  SyntheticSpec spec = Small(LabelRule::kParity, 2);
  spec.leak_rate = 0.5;
  const GeneratedBenchmark b = Generate(spec);
  int leaked = 0;
  for (const Instance& inst : b.test.instances) {
    const bool has = b.leaked_ids.count(inst.id) > 0;
    leaked += has;
    const std::string& text = inst.rationales.at("leaky").text;
    EXPECT_EQ(text == "The answer is withheld.", !has) << inst.id;
  }
  EXPECT_GT(leaked, 800);
  EXPECT_LT(leaked, 1200);
}

TEST(BenchgenTest, OpenModeChoices) {
  SyntheticSpec spec = Small(LabelRule::kParity, 2);
  spec.mode = LabelMode::kPerInstance;
  const GeneratedBenchmark b = Generate(spec);
  for (const Instance& inst : b.test.instances) {
    ASSERT_TRUE(inst.choices.has_value());
    EXPECT_EQ(inst.choices->size(), 4u);
  }
  EXPECT_NEAR(OracleInfo(b.oracle, "gold"), OracleEntropy(b.oracle, "question"), 1e-9);
  EXPECT_NEAR(OracleInfo(b.oracle, "distractor"), 0.0, 1e-12);
}

TEST(BenchgenTest, SpecValidationAndJson) {
  SyntheticSpec bad;
  bad.num_facts = 9;
  EXPECT_THROW(Validate(bad), ConfigError);
  bad = SyntheticSpec{};
  bad.reveal_count = 3;
  EXPECT_THROW(Validate(bad), ConfigError);
  bad = SyntheticSpec{};
  bad.leak_rate = 1.5;
  EXPECT_THROW(Validate(bad), ConfigError);
  const SyntheticSpec s = Small(LabelRule::kConjunction, 1);
  EXPECT_EQ(SpecToJson(SpecFromJson(SpecToJson(s))), SpecToJson(s));
  EXPECT_THROW(SpecFromJson(R"({"num_fact": 2})"), ConfigError);
}

}  // namespace
}  // namespace rateval
