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

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "rateval/attribution.h"
#include "rateval/errors.h"
#include "rateval/random.h"
#include "test_support.h"

namespace rateval {
namespace {

const DetectionResult& LeakyDetection() {
  static const DetectionResult* det = [] {
    const PipelineData& d = testing::DefaultData();
    return new DetectionResult(DetectLeaks(d.train, d.val, "leaky", d.vocab, DefaultDetectionConfig()));
  }();
  return *det;
}

std::unique_ptr<Model> RandomModel(int order, uint64_t seed) {
  auto m = MakeModel(FamilyConfig{Architecture::kEmbeddingBag, 4, order, 32}, 20, 3, seed);
  Rng rng(seed);
  for (Parameter& p : m->parameters()) {
    for (double& x : p.value.data) x = rng.Uniform(-1, 1);
  }
  return m;
}

TEST(IntegratedGradientsTest, UnigramScoresMatchClosedForm) {
  // Rows enter the logit linearly: score(p) = w_t . e_tok / |bag|.
  auto m = RandomModel(1, 3);
  const View v{{4, 5}, {6, 7, 6}, {}};
  const AttributionMap map = IntegratedGradients(*m, v, 2, 16);
  const Matrix& emb = m->parameters()[0].value;
  const Matrix& head = m->parameters()[1].value;
  const double rows = 2 + 1 + 3;  // question, separator, rationale
  ASSERT_EQ(map.tokens.size(), 3u);
  for (const TokenAttribution& t : map.tokens) {
    double want = 0;
    for (int k = 0; k < 4; ++k) want += head.at(2, k) * emb.at(t.token, k);
    EXPECT_NEAR(t.score, want / rows, 1e-12);
  }
}

TEST(IntegratedGradientsTest, LinearModelIsStepIndependent) {
  for (int order : {1, 2}) {
    auto m = RandomModel(order, 5);
    const View v{{4, 5}, {6, 7, 8, 9}, {}};
    const AttributionMap a = IntegratedGradients(*m, v, 0, 1);
    const AttributionMap b = IntegratedGradients(*m, v, 0, 256);
    for (size_t i = 0; i < a.tokens.size(); ++i) EXPECT_NEAR(a.tokens[i].score, b.tokens[i].score, 1e-9);
    EXPECT_NEAR(a.residual, 0.0, 1e-9);
  }
  EXPECT_THROW(IntegratedGradients(*RandomModel(1, 1), View{{4}, {5}, {}}, 0, 0), ConfigError);
}

TEST(IntegratedGradientsTest, CompletenessOnTrainedModel) {
  for (const AttributionMap& m : LeakyDetection().maps) {
    double sum = 0;
    for (const TokenAttribution& t : m.tokens) sum += t.score;
    EXPECT_NEAR(sum - m.output_delta, m.residual, 1e-12);
    EXPECT_LE(std::abs(m.residual), 0.01 * std::max(1e-6, std::abs(m.output_delta)));
  }
}

TEST(DetectionTest, LabelTokensRankTopTwo) {
  const PipelineData& d = testing::DefaultData();
  std::vector<std::pair<double, TokenId>> ranked;
  for (const auto& [tok, stat] : LeakyDetection().global.overall) ranked.push_back({stat.mean, tok});
  std::sort(ranked.rbegin(), ranked.rend());
  ASSERT_GE(ranked.size(), 2u);
  const std::set<TokenId> top{ranked[0].second, ranked[1].second};
  EXPECT_EQ(top, (std::set<TokenId>{d.vocab.LabelToken(0), d.vocab.LabelToken(1)}));
}

TEST(DetectionTest, TopOneSelectsExactlyLabelTokens) {
  const PipelineData& d = testing::DefaultData();
  const LeakSelection& sel = LeakyDetection().selection;
  EXPECT_EQ(sel.types, (std::set<TokenId>{d.vocab.LabelToken(0), d.vocab.LabelToken(1)}));
  ASSERT_EQ(sel.masks.size(), d.train.size());
  for (size_t i = 0; i < d.train.size(); ++i) {
    const TokenSeq& r = d.train.instances[i].rationales.at("leaky").tokens;
    const LeakMask& m = sel.masks[i];
    EXPECT_EQ(m.selected.size(), r.size());
    for (const MaskSpan& s : m.spans) EXPECT_LE(s.start + s.length, static_cast<int>(r.size()));
  }
}

TEST(DetectionTest, GoldSelectsNothingAboveFloor) {
  const PipelineData& d = testing::DefaultData();
  const DetectionResult det = DetectLeaks(d.train, d.val, "gold", d.vocab, DefaultDetectionConfig());
  EXPECT_TRUE(det.selection.types.empty());
  for (const LeakMask& m : det.selection.masks) EXPECT_TRUE(m.empty());
}

TEST(SelectionTest, LoweringThresholdNeverShrinks) {
  const GlobalAttribution& g = LeakyDetection().global;
  std::set<TokenId> prev;
  for (double tau : {100.0, 5.0, 4.0, 1.0, 0.01, 1e-9, 1e-300}) {
    SelectionRule rule;
    rule.kind = SelectionRule::Kind::kThreshold;
    rule.threshold = tau;
    const std::set<TokenId> cur = SelectTypes(g, rule);
    EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end())) << tau;
    prev = cur;
  }
}

TEST(SelectionTest, TopKPerLabelGroup) {
  GlobalAttribution g;
  g.overall = {{10, {3.0, 5}}, {11, {2.0, 5}}, {12, {1.0, 5}}, {13, {0.001, 5}}};
  g.by_label[100] = {{10, {3.0, 3}}, {12, {1.0, 3}}, {13, {0.001, 3}}};
  g.by_label[101] = {{11, {2.0, 2}}, {13, {0.001, 2}}};
  SelectionRule rule;
  rule.top_k = 1;
  EXPECT_EQ(SelectTypes(g, rule), (std::set<TokenId>{10, 11}));
  rule.top_k = 2;
  EXPECT_EQ(SelectTypes(g, rule), (std::set<TokenId>{10, 11, 12}));
  // The floor removes the near-zero type even when k leaves room.
  rule.top_k = 3;
  EXPECT_EQ(SelectTypes(g, rule), (std::set<TokenId>{10, 11, 12}));
  rule.min_score = -1.0;
  EXPECT_EQ(SelectTypes(g, rule), (std::set<TokenId>{10, 11, 12, 13}));
}

TEST(SelectionTest, MergeRuns) {
  const std::vector<MaskSpan> want{{1, 2}, {4, 1}};
  EXPECT_EQ(MergeRuns({false, true, true, false, true}), want);
  EXPECT_TRUE(MergeRuns({false, false}).empty());
}

TEST(AggregateTest, MeansPerTypeAndLabel) {
  std::vector<AttributionMap> maps(2);
  maps[0].tokens = {{7, 0, 1.0}, {8, 1, 2.0}};
  maps[1].tokens = {{7, 0, 3.0}};
  const GlobalAttribution g = AggregateGlobal(maps, {50, 51});
  EXPECT_DOUBLE_EQ(g.overall.at(7).mean, 2.0);
  EXPECT_EQ(g.overall.at(7).count, 2);
  EXPECT_DOUBLE_EQ(g.by_label.at(50).at(7).mean, 1.0);
  EXPECT_DOUBLE_EQ(g.by_label.at(51).at(7).mean, 3.0);
}

}  // namespace
}  // namespace rateval
