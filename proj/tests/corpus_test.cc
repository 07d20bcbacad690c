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

#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "rateval/corpus.h"
#include "rateval/errors.h"
#include "rateval/tokenizer.h"
#include "test_support.h"

namespace rateval {
namespace {

TEST(SegmentTest, SplitsPunctuationAndLowercases) {
  const std::vector<std::string> want{"switch", "-", "2", "up", "?"};
  EXPECT_EQ(Segment("Switch-2 up?"), want);
  EXPECT_EQ(JoinTokens(want), "switch - 2 up ?");
  EXPECT_EQ(Segment(JoinTokens(want)), want);
}

TEST(SegmentTest, ReservedSpellingsSurvive) {
  const std::vector<std::string> want{"a", "<s0>", "b", "<sep>"};
  EXPECT_EQ(Segment("a <s0> b<sep>"), want);
}

TEST(SegmentTest, EmptyAndWhitespace) {
  EXPECT_TRUE(Segment("").empty());
  EXPECT_TRUE(Segment(" \t\n").empty());
}

TEST(VocabularyTest, ReservedLayout) {
  Vocabulary v(4, {"True", "False"});
  EXPECT_EQ(v.Token(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.Token(Vocabulary::kUnk), "<unk>");
  EXPECT_EQ(v.Token(Vocabulary::kSep), "<sep>");
  EXPECT_EQ(v.reserved_count(), 3 + 4 + 2);
  EXPECT_EQ(v.Token(v.LabelToken(0)), "true");
  EXPECT_TRUE(v.IsSentinel(v.Sentinel(3)));
  EXPECT_FALSE(v.IsSentinel(v.LabelToken(0)));
  EXPECT_EQ(v.Lookup("missing"), Vocabulary::kUnk);
}

TEST(VocabularyTest, MultiTokenLabelRejected) {
  EXPECT_THROW(Vocabulary(2, {"Rio de Janeiro"}), ConfigError);
}

TEST(VocabularyTest, BenchmarkSizeMatchesTemplateInventory) {
  // Hand count of the default fixed-mode templates:
  //   question   is circuit live ? + 16 entity names
  //   gold       switch states for a b : up down .
  //   leaky      the answer (labels are reserved)
  //   distractor 12 filler words
  const int inventory = 4 + 16 + 9 + 2 + 12;
  const int reserved = 3 + 8 + 2;
  EXPECT_EQ(testing::DefaultData().vocab.size(), inventory + reserved);
}

TEST(VocabularyTest, RoundTripOnCorpus) {
  const PipelineData& d = testing::DefaultData();
  for (const Dataset* split : {&d.train, &d.test}) {
    for (const Instance& inst : split->instances) {
      const TokenSeq ids = d.vocab.Encode(inst.question);
      EXPECT_EQ(d.vocab.Encode(d.vocab.Decode(ids)), ids);
      for (const auto& [name, r] : inst.rationales) {
        EXPECT_EQ(d.vocab.Encode(d.vocab.Decode(r.tokens)), r.tokens) << name;
      }
    }
  }
}

TEST(BuildVocabTest, MinCountDropsRareTokens) {
  Dataset ds;
  ds.label_space.labels = {"yes", "no"};
  for (int i = 0; i < 3; ++i) {
    Instance inst;
    inst.id = "q" + std::to_string(i);
    inst.question = i == 0 ? "rare common" : "common";
    ds.instances.push_back(inst);
  }
  Vocabulary v = BuildVocab({&ds}, 2, 1);
  EXPECT_TRUE(v.Contains("common"));
  EXPECT_FALSE(v.Contains("rare"));
  EXPECT_THROW(BuildVocab({&ds}, 0, 1), ConfigError);
  EXPECT_THROW(BuildVocab({}, 1, 1), ConfigError);
}

TEST(RationaleTest, LeakyTemplates) {
  EXPECT_EQ(MakeLeaky("True", "The answer is {label}.").text, "The answer is True.");
  EXPECT_EQ(MakeLeaky("Rio de Janeiro", "The answer is {label}.").text,
            "The answer is Rio de Janeiro.");
  EXPECT_THROW(MakeLeaky("x", "no placeholder"), ConfigError);
  EXPECT_THROW(MakeLeaky("x", "{label} {label}"), ConfigError);
}

TEST(RationaleTest, GoldLeakyConcatenates) {
  Vocabulary v(0, {"True", "False"});
  RationaleText gold{"Chuck Norris is a person.", {}, VariantKind::kGold};
  gold.tokens = v.EncodeGrowing(gold.text);
  RationaleText leaky = MakeLeaky("True", "The answer is {label}.");
  leaky.tokens = v.EncodeGrowing(leaky.text);
  const RationaleText joined = MakeGoldLeaky(gold, leaky);
  EXPECT_EQ(joined.text, "Chuck Norris is a person. The answer is True.");
  TokenSeq want = gold.tokens;
  want.insert(want.end(), leaky.tokens.begin(), leaky.tokens.end());
  EXPECT_EQ(joined.tokens, want);
  EXPECT_EQ(joined.kind, VariantKind::kGoldLeaky);
}

TEST(RationaleTest, VacuousFillsSlots) {
  EXPECT_EQ(MakeVacuous("Is circuit c3 live?", "True", "circuit {name} is live: {label}.",
                        {{"name", "c3"}})
                .text,
            "circuit c3 is live: true.");
  EXPECT_EQ(MakeVacuous("Could Chuck Norris ride a horse?", "True", "{question}: {label}.").text,
            "Could Chuck Norris ride a horse: true.");
}

TEST(RationaleTest, GoldLeakyOnBenchmarkIsExactConcatenation) {
  const PipelineData& d = testing::DefaultData();
  for (const Instance& inst : d.test.instances) {
    TokenSeq want = inst.rationales.at("gold").tokens;
    const TokenSeq& leak = inst.rationales.at("leaky").tokens;
    want.insert(want.end(), leak.begin(), leak.end());
    ASSERT_EQ(inst.rationales.at("gold_leaky").tokens, want) << inst.id;
  }
}

Dataset Balanced(int per_label) {
  Dataset ds;
  ds.label_space.labels = {"yes", "no", "maybe"};
  for (int l = 0; l < 3; ++l) {
    for (int i = 0; i < per_label; ++i) {
      Instance inst;
      inst.id = "i" + std::to_string(l) + "-" + std::to_string(i);
      inst.question = "q";
      inst.label = l;
      ds.instances.push_back(inst);
    }
  }
  return ds;
}

TEST(SplitTest, StratifiedFractions) {
  const Dataset ds = Balanced(150);
  const SplitResult s = Split(ds, {0.6, 0.2, 0.2}, 7);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), ds.size());
  const std::array<double, 3> ratios{0.6, 0.2, 0.2};
  const Dataset* parts[3] = {&s.train, &s.val, &s.test};
  for (int p = 0; p < 3; ++p) {
    std::map<int, int> counts;
    for (const Instance& inst : parts[p]->instances) ++counts[inst.label];
    for (int l = 0; l < 3; ++l) EXPECT_LE(std::abs(counts[l] / 150.0 - ratios[p]), 0.02);
  }
  std::set<std::string> ids;
  for (const Dataset* part : parts) {
    for (const Instance& inst : part->instances) EXPECT_TRUE(ids.insert(inst.id).second);
  }
}

TEST(SplitTest, DeterministicUnderSeed) {
  const Dataset ds = Balanced(120);
  const SplitResult a = Split(ds, {0.5, 0.25, 0.25}, 3);
  const SplitResult b = Split(ds, {0.5, 0.25, 0.25}, 3);
  EXPECT_EQ(SerializeJsonl(a.train), SerializeJsonl(b.train));
  EXPECT_EQ(SerializeJsonl(a.test), SerializeJsonl(b.test));
  EXPECT_THROW(Split(ds, {0.5, 0.5, 0.5}, 3), ConfigError);
}

TEST(JsonlTest, RoundTripAndErrors) {
  const PipelineData& d = testing::DefaultData();
  const std::vector<std::string> labels{"True", "False"};
  const std::string text = SerializeJsonl(d.val);
  Dataset back = ParseJsonl(text, &labels);
  EXPECT_EQ(SerializeJsonl(back), text);
  EXPECT_THROW(ParseJsonl("{not json}\n", &labels), DataError);
  EXPECT_THROW(ParseJsonl(R"({"id":"a","question":"q","label":"Maybe","rationales":{}})" "\n", &labels),
               DataError);
  const std::string dup = R"({"id":"a","question":"q","label":"True","rationales":{}})" "\n";
  EXPECT_THROW(ParseJsonl(dup + dup, &labels), DataError);
}

}  // namespace
}  // namespace rateval
