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

#ifndef RATEVAL_BENCHGEN_H_
#define RATEVAL_BENCHGEN_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rateval/corpus.h"

namespace rateval {

enum class LabelRule { kParity, kConjunction };

struct SyntheticSpec {
  // Latent binary facts per instance, 1..8.
  int num_facts = 2;
  LabelRule label_rule = LabelRule::kParity;
  // Fraction of instances whose leaky / gold_leaky rationale carries the
  // label verbatim; the rest carry a neutral sentence.
  double leak_rate = 1.0;
  // Facts verbalized by the gold rationale, 0..num_facts.
  int reveal_count = 2;
  int train_size = 2000;
  int val_size = 500;
  int test_size = 500;
  LabelMode mode = LabelMode::kFixed;
  int distractor_tokens = 6;
  // Distinct question entities.
  int num_entities = 16;
  uint64_t seed = 1;
};

// Throws ConfigError on out-of-range fields.
void Validate(const SyntheticSpec& spec);

// Exact label distributions by counting over a population.
struct OracleTable {
  struct Cell {
    double weight = 0;               // instances with this conditioning value
    std::vector<double> distribution;  // p(y | value), sums to 1
  };
  int num_labels = 0;
  size_t population = 0;
  // conditioning name -> conditioning value -> cell. Names are "none",
  // "question" and "question+<variant>" (leak tokens deleted).
  std::map<std::string, std::map<std::string, Cell>> tables;
};

// E over the population of -ln p(y | conditioning value), in nats.
// Throws ConfigError for an unknown conditioning name.
double OracleEntropy(const OracleTable& table, const std::string& conditioning);

// H(Y | question) - H(Y | question + leak-free variant text).
double OracleInfo(const OracleTable& table, const std::string& variant);

// Builds a table over `population`. `leak_free[variant][i]` keys the content
// of instance i's variant with planted leak tokens deleted; filler drawn
// independently of the facts may be left out of the key. In per-instance mode
// the label variable is the first token of the correct choice.
OracleTable BuildOracle(const Dataset& population,
                        const std::map<std::string, std::vector<std::string>>& leak_free);

struct GeneratedBenchmark {
  Dataset train, val, test;
  // Computed over the test split.
  OracleTable oracle;
  // Ids whose leaky / gold_leaky rationales carry a planted leak.
  std::set<std::string> leaked_ids;
  std::vector<std::string> variants;
};

// Deterministic under spec.seed. Facts are drawn in blocks of 2^k instances
// that share one entity and cover every fact assignment once, so question and
// label are exactly independent on any split whose size is a multiple of 2^k.
GeneratedBenchmark Generate(const SyntheticSpec& spec);

// {"entropies": {...}, "info": {...}, "leaked_ids": [...], "population": "test"}
std::string OracleSidecarJson(const GeneratedBenchmark& bench);

SyntheticSpec SpecFromJson(const std::string& json_text);
std::string SpecToJson(const SyntheticSpec& spec);

// Fixed label strings used by the generator.
const std::vector<std::string>& BenchmarkLabels();

}  // namespace rateval

#endif  // RATEVAL_BENCHGEN_H_
