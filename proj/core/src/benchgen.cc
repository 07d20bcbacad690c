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

#include "rateval/benchgen.h"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"
#include "rateval/errors.h"
#include "rateval/random.h"

namespace rateval {
namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kFactNames[8] = {"a", "b", "c", "d", "e", "f", "g", "h"};
constexpr const char* kColors[4] = {"red", "green", "blue", "amber"};
constexpr const char* kFiller[12] = {"wire", "panel", "lamp",   "cable", "board", "fuse",
                                     "socket", "relay", "meter", "plug",  "grid",  "node"};
constexpr char kLeakTemplate[] = "The answer is {label}.";
constexpr char kNeutralLeak[] = "The answer is withheld.";
constexpr char kFixedVacuous[] = "circuit {name} is live: {label}.";
constexpr char kOpenVacuous[] = "circuit {name} is powered by {unit}.";
constexpr char kKeySep = '\x1f';

int RuleValue(LabelRule rule, const std::vector<int>& z) {
  if (rule == LabelRule::kParity) {
    return std::accumulate(z.begin(), z.end(), 0) % 2;
  }
  for (int v : z) {
    if (v == 0) return 0;
  }
  return 1;
}

std::string GoldText(const std::vector<int>& z, int reveal) {
  if (reveal == 0) return "no switch states are known.";
  std::string names, states;
  for (int f = 0; f < reveal; ++f) {
    names += std::string(" ") + kFactNames[f];
    states += z[static_cast<size_t>(f)] ? " up" : " down";
  }
  return "switch states for" + names + " :" + states + " .";
}

// Structured content of the gold text: the revealed fact states.
std::string GoldKey(const std::vector<int>& z, int reveal) {
  std::string key;
  for (int f = 0; f < reveal; ++f) key += z[static_cast<size_t>(f)] ? '1' : '0';
  return key;
}

std::string LabelKeyOf(const Dataset& ds, size_t i) {
  const Instance& inst = ds.instances[i];
  if (ds.label_space.mode == LabelMode::kFixed) return ds.label_space.labels[inst.label];
  const std::vector<std::string> toks = Segment((*inst.choices)[inst.label].text);
  return toks.empty() ? std::string() : toks.front();
}

struct SplitOutput {
  Dataset data;
  std::map<std::string, std::vector<std::string>> leak_free;
  std::set<std::string> leaked;
};

SplitOutput GenerateSplit(const SyntheticSpec& spec, SplitTag tag, int size) {
  const std::string split_name(SplitTagName(tag));
  Rng rng(DeriveSeed(spec.seed, "benchgen/" + split_name));
  const bool fixed = spec.mode == LabelMode::kFixed;
  const std::vector<std::string>& labels = BenchmarkLabels();
  SplitOutput out;
  out.data.split = tag;
  out.data.label_space.mode = spec.mode;
  if (fixed) out.data.label_space.labels = labels;

  const int block = 1 << spec.num_facts;
  std::vector<int> assignments(static_cast<size_t>(block));
  int produced = 0;
  while (produced < size) {
    const std::string entity = "c" + std::to_string(rng.Below(static_cast<uint64_t>(spec.num_entities)));
    const bool leaked = rng.Bernoulli(spec.leak_rate);
    std::iota(assignments.begin(), assignments.end(), 0);
    rng.Shuffle(std::span<int>(assignments));
    for (int b = 0; b < block && produced < size; ++b, ++produced) {
      std::vector<int> z(static_cast<size_t>(spec.num_facts));
      for (int f = 0; f < spec.num_facts; ++f) z[static_cast<size_t>(f)] = (assignments[b] >> f) & 1;
      const int rule = RuleValue(spec.label_rule, z);

      Instance inst;
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%06d", split_name.c_str(), produced);
      inst.id = id;
      std::string label_text;
      std::map<std::string, std::string> slots{{"name", entity}};
      if (fixed) {
        inst.question = "Is circuit " + entity + " live?";
        inst.label = rule ? 0 : 1;  // labels are {True, False}
        label_text = labels[static_cast<size_t>(inst.label)];
      } else {
        inst.question = "Which unit powers circuit " + entity + "?";
        const int color = 2 * rule + z[0];
        std::vector<int> order{0, 1, 2, 3};
        rng.Shuffle(std::span<int>(order));
        std::vector<Choice> choices;
        for (int c = 0; c < 4; ++c) {
          const std::string unit = "u" + std::to_string(10000 + rng.Below(90000));
          choices.push_back({std::string(kColors[order[c]]) + " " + unit, {}});
          if (order[c] == color) {
            inst.label = c;
            slots["unit"] = unit;
          }
        }
        label_text = choices[static_cast<size_t>(inst.label)].text;
        inst.choices = std::move(choices);
      }

      RationaleText gold{GoldText(z, spec.reveal_count), {}, VariantKind::kGold};
      RationaleText leaky = leaked ? MakeLeaky(label_text, kLeakTemplate)
                                   : RationaleText{kNeutralLeak, {}, VariantKind::kLeaky};
      RationaleText vacuous =
          MakeVacuous(inst.question, label_text, fixed ? kFixedVacuous : kOpenVacuous, slots);
      std::string filler;
      for (int t = 0; t < spec.distractor_tokens; ++t) {
        if (t > 0) filler += ' ';
        filler += kFiller[rng.Below(12)];
      }
      inst.rationales["gold"] = gold;
      inst.rationales["leaky"] = leaky;
      inst.rationales["gold_leaky"] = MakeGoldLeaky(gold, leaky);
      inst.rationales["vacuous"] = vacuous;
      inst.rationales["distractor"] = {filler, {}, VariantKind::kDistractor};

      // Oracle keys: the label-independent structure of each text with the
      // planted leak removed. Filler is drawn independently of the facts and
      // is not part of any key.
      const std::string gold_key = GoldKey(z, spec.reveal_count);
      const std::string leak_key = leaked ? "L" : "N";
      out.leak_free["gold"].push_back(gold_key);
      out.leak_free["leaky"].push_back(leak_key);
      out.leak_free["gold_leaky"].push_back(gold_key + "|" + leak_key);
      out.leak_free["vacuous"].push_back(entity);
      out.leak_free["distractor"].push_back("");
      if (leaked) out.leaked.insert(inst.id);
      out.data.instances.push_back(std::move(inst));
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& BenchmarkLabels() {
  static const std::vector<std::string> labels{"True", "False"};
  return labels;
}

void Validate(const SyntheticSpec& spec) {
  if (spec.num_facts < 1 || spec.num_facts > 8) throw ConfigError("num_facts must be in [1, 8]");
  if (spec.reveal_count < 0 || spec.reveal_count > spec.num_facts) {
    throw ConfigError("reveal_count must be in [0, num_facts]");
  }
  if (spec.train_size < 1 || spec.val_size < 1 || spec.test_size < 1) {
    throw ConfigError("split sizes must be >= 1");
  }
  if (!(spec.leak_rate >= 0.0 && spec.leak_rate <= 1.0)) throw ConfigError("leak_rate must be in [0, 1]");
  if (spec.distractor_tokens < 0) throw ConfigError("distractor_tokens must be >= 0");
  if (spec.num_entities < 1) throw ConfigError("num_entities must be >= 1");
  if (spec.mode == LabelMode::kPerInstance && spec.num_facts < 2) {
    throw ConfigError("per_instance mode needs num_facts >= 2");
  }
}

double OracleEntropy(const OracleTable& table, const std::string& conditioning) {
  auto it = table.tables.find(conditioning);
  if (it == table.tables.end()) throw ConfigError("unknown oracle conditioning '" + conditioning + "'");
  double h = 0;
  for (const auto& [value, cell] : it->second) {
    for (double p : cell.distribution) {
      if (p > 0) h -= cell.weight * p * std::log(p);
    }
  }
  return h;
}

double OracleInfo(const OracleTable& table, const std::string& variant) {
  return OracleEntropy(table, "question") - OracleEntropy(table, "question+" + variant);
}

OracleTable BuildOracle(const Dataset& population,
                        const std::map<std::string, std::vector<std::string>>& leak_free) {
  OracleTable table;
  table.population = population.size();
  if (population.size() == 0) throw DataError("oracle population is empty");
  std::map<std::string, int> label_index;
  std::vector<std::string> keys(population.size());
  for (size_t i = 0; i < population.size(); ++i) {
    keys[i] = LabelKeyOf(population, i);
    label_index.emplace(keys[i], 0);
  }
  if (population.label_space.mode == LabelMode::kFixed) {
    label_index.clear();
    for (size_t l = 0; l < population.label_space.labels.size(); ++l) {
      label_index[population.label_space.labels[l]] = static_cast<int>(l);
    }
  } else {
    int next = 0;
    for (auto& [k, idx] : label_index) idx = next++;
  }
  table.num_labels = static_cast<int>(label_index.size());

  auto build = [&](const std::string& name, auto value_of) {
    std::map<std::string, std::vector<double>> counts;
    for (size_t i = 0; i < population.size(); ++i) {
      auto& c = counts[value_of(i)];
      c.resize(static_cast<size_t>(table.num_labels), 0.0);
      c[static_cast<size_t>(label_index.at(keys[i]))] += 1.0;
    }
    auto& out = table.tables[name];
    for (auto& [value, c] : counts) {
      const double n = std::accumulate(c.begin(), c.end(), 0.0);
      OracleTable::Cell cell;
      cell.weight = n / static_cast<double>(population.size());
      for (double v : c) cell.distribution.push_back(v / n);
      out[value] = std::move(cell);
    }
  };
  build("none", [](size_t) { return std::string(); });
  build("question", [&](size_t i) { return population.instances[i].question; });
  for (const auto& [variant, values] : leak_free) {
    if (values.size() != population.size()) throw DataError("leak-free list size mismatch for " + variant);
    build("question+" + variant,
          [&](size_t i) { return population.instances[i].question + kKeySep + values[i]; });
  }
  return table;
}

GeneratedBenchmark Generate(const SyntheticSpec& spec) {
  Validate(spec);
  GeneratedBenchmark bench;
  SplitOutput train = GenerateSplit(spec, SplitTag::kTrain, spec.train_size);
  SplitOutput val = GenerateSplit(spec, SplitTag::kVal, spec.val_size);
  SplitOutput test = GenerateSplit(spec, SplitTag::kTest, spec.test_size);
  bench.oracle = BuildOracle(test.data, test.leak_free);
  bench.train = std::move(train.data);
  bench.val = std::move(val.data);
  bench.test = std::move(test.data);
  for (auto* s : {&train.leaked, &val.leaked, &test.leaked}) bench.leaked_ids.insert(s->begin(), s->end());
  bench.variants = {"gold", "leaky", "gold_leaky", "vacuous", "distractor"};
  return bench;
}

std::string OracleSidecarJson(const GeneratedBenchmark& bench) {
  Json j = Json::object();
  Json ent = Json::object();
  for (const auto& [name, cells] : bench.oracle.tables) ent[name] = OracleEntropy(bench.oracle, name);
  j["entropies"] = ent;
  Json info = Json::object();
  for (const std::string& v : bench.variants) info[v] = OracleInfo(bench.oracle, v);
  j["info"] = info;
  j["leaked_ids"] = std::vector<std::string>(bench.leaked_ids.begin(), bench.leaked_ids.end());
  j["population"] = "test";
  return j.dump(2) + "\n";
}

SyntheticSpec SpecFromJson(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("spec is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("spec must be a JSON object");
  SyntheticSpec s;
  try {
    for (auto& [key, v] : j.items()) {
      if (key == "num_facts") s.num_facts = v.get<int>();
      else if (key == "label_rule") {
        const std::string r = v.get<std::string>();
        if (r == "parity") s.label_rule = LabelRule::kParity;
        else if (r == "conjunction") s.label_rule = LabelRule::kConjunction;
        else throw ConfigError("unknown label_rule '" + r + "'");
      } else if (key == "leak_rate") s.leak_rate = v.get<double>();
      else if (key == "reveal_count") s.reveal_count = v.get<int>();
      else if (key == "train_size") s.train_size = v.get<int>();
      else if (key == "val_size") s.val_size = v.get<int>();
      else if (key == "test_size") s.test_size = v.get<int>();
      else if (key == "mode") {
        const std::string m = v.get<std::string>();
        if (m == "fixed") s.mode = LabelMode::kFixed;
        else if (m == "per_instance") s.mode = LabelMode::kPerInstance;
        else throw ConfigError("unknown mode '" + m + "'");
      } else if (key == "distractor_tokens") s.distractor_tokens = v.get<int>();
      else if (key == "num_entities") s.num_entities = v.get<int>();
      else if (key == "seed") s.seed = v.get<uint64_t>();
      else throw ConfigError("unknown spec key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spec field has the wrong type: ") + e.what());
  }
  Validate(s);
  return s;
}

std::string SpecToJson(const SyntheticSpec& spec) {
  Json j = Json::object();
  j["num_facts"] = spec.num_facts;
  j["label_rule"] = spec.label_rule == LabelRule::kParity ? "parity" : "conjunction";
  j["leak_rate"] = spec.leak_rate;
  j["reveal_count"] = spec.reveal_count;
  j["train_size"] = spec.train_size;
  j["val_size"] = spec.val_size;
  j["test_size"] = spec.test_size;
  j["mode"] = spec.mode == LabelMode::kFixed ? "fixed" : "per_instance";
  j["distractor_tokens"] = spec.distractor_tokens;
  j["num_entities"] = spec.num_entities;
  j["seed"] = spec.seed;
  return j.dump();
}

}  // namespace rateval
