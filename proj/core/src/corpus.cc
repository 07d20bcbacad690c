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

#include "rateval/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rateval/errors.h"
#include "rateval/io.h"
#include "rateval/random.h"

namespace rateval {
namespace {

using Json = nlohmann::ordered_json;

const TokenSeq kNullSequence;

std::string ReplaceAll(std::string s, std::string_view from, std::string_view to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

size_t CountOccurrences(std::string_view s, std::string_view needle) {
  size_t n = 0;
  for (size_t pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(c));
  }
  return out;
}

std::string Trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

VariantKind VariantKindFromName(std::string_view name) {
  if (name == "gold") return VariantKind::kGold;
  if (name == "leaky") return VariantKind::kLeaky;
  if (name == "gold_leaky") return VariantKind::kGoldLeaky;
  if (name == "vacuous") return VariantKind::kVacuous;
  if (name == "distractor") return VariantKind::kDistractor;
  return VariantKind::kCustom;
}

std::string_view VariantKindName(VariantKind kind) {
  switch (kind) {
    case VariantKind::kGold: return "gold";
    case VariantKind::kLeaky: return "leaky";
    case VariantKind::kGoldLeaky: return "gold_leaky";
    case VariantKind::kVacuous: return "vacuous";
    case VariantKind::kDistractor: return "distractor";
    case VariantKind::kCustom: return "custom";
  }
  return "custom";
}

const TokenSeq& Instance::RationaleTokens(const std::string& variant) const {
  auto it = rationales.find(variant);
  return it == rationales.end() ? kNullSequence : it->second.tokens;
}

int LabelSpace::Find(std::string_view label) const {
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<int>(i);
  }
  return -1;
}

std::string_view SplitTagName(SplitTag tag) {
  switch (tag) {
    case SplitTag::kTrain: return "train";
    case SplitTag::kVal: return "val";
    case SplitTag::kTest: return "test";
  }
  return "train";
}

int Dataset::NumLabels(size_t i) const {
  if (label_space.mode == LabelMode::kFixed) return static_cast<int>(label_space.labels.size());
  const auto& choices = instances.at(i).choices;
  return choices ? static_cast<int>(choices->size()) : 0;
}

const std::string& Dataset::LabelText(size_t i, int label) const {
  if (label_space.mode == LabelMode::kFixed) return label_space.labels.at(static_cast<size_t>(label));
  return instances.at(i).choices->at(static_cast<size_t>(label)).text;
}

void Validate(const Dataset& dataset) {
  const bool fixed = dataset.label_space.mode == LabelMode::kFixed;
  if (fixed && dataset.label_space.labels.size() < 2) {
    throw DataError("fixed label space needs at least 2 labels");
  }
  std::set<std::string> ids;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Instance& inst = dataset.instances[i];
    if (!ids.insert(inst.id).second) throw DataError("duplicate instance id '" + inst.id + "'");
    if (Trim(inst.question).empty()) throw DataError("instance '" + inst.id + "' has an empty question");
    if (fixed == inst.choices.has_value()) {
      throw DataError("instance '" + inst.id + "' does not match the label-space mode");
    }
    if (!fixed && inst.choices->size() < 2) {
      throw DataError("instance '" + inst.id + "' needs at least 2 choices");
    }
    if (inst.label < 0 || inst.label >= dataset.NumLabels(i)) {
      throw DataError("instance '" + inst.id + "' has an out-of-range label");
    }
  }
}

Vocabulary BuildVocab(const std::vector<const Dataset*>& datasets, int min_count,
                      int num_sentinels) {
  if (datasets.empty()) throw ConfigError("build_vocab needs at least one dataset");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  const LabelSpace& space = datasets.front()->label_space;
  Vocabulary vocab(num_sentinels,
                   space.mode == LabelMode::kFixed ? space.labels : std::vector<std::string>{});
  std::map<std::string, long> counts;
  auto count = [&](std::string_view text) {
    for (std::string& tok : Segment(text)) ++counts[std::move(tok)];
  };
  for (const Dataset* ds : datasets) {
    for (const Instance& inst : ds->instances) {
      count(inst.question);
      if (inst.choices) {
        for (const Choice& c : *inst.choices) count(c.text);
      }
      for (const auto& [name, r] : inst.rationales) count(r.text);
    }
  }
  std::vector<std::pair<std::string, long>> ordered;
  for (auto& [tok, n] : counts) {
    if (n >= min_count && !vocab.Contains(tok)) ordered.emplace_back(tok, n);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [tok, n] : ordered) vocab.Add(tok);
  return vocab;
}

void EncodeDataset(Dataset& dataset, const Vocabulary& vocab) {
  for (Instance& inst : dataset.instances) {
    inst.question_tokens = vocab.Encode(inst.question);
    if (inst.choices) {
      for (Choice& c : *inst.choices) c.tokens = vocab.Encode(c.text);
    }
    for (auto& [name, r] : inst.rationales) r.tokens = vocab.Encode(r.text);
  }
}

Dataset ParseJsonl(std::string_view contents, const std::vector<std::string>* fixed_labels) {
  struct Raw {
    Instance inst;
    std::string label;
    size_t line;
  };
  Dataset ds;
  std::vector<Raw> raws;
  std::optional<bool> fixed_mode;
  std::istringstream in{std::string(contents)};
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    auto fail = [&](const std::string& what) {
      throw DataError("line " + std::to_string(line_no) + ": " + what);
    };
    if (!j.is_object()) fail("expected a JSON object");
    if (j.size() == 1 && j.contains("provenance")) {
      if (!raws.empty()) fail("provenance header must be the first line");
      for (auto& [k, v] : j["provenance"].items()) {
        ds.provenance[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
      continue;
    }
    Raw raw;
    raw.line = line_no;
    try {
      raw.inst.id = j.at("id").get<std::string>();
      raw.inst.question = j.at("question").get<std::string>();
      raw.label = j.at("label").get<std::string>();
      const bool has_choices = j.contains("choices") && !j["choices"].is_null();
      if (has_choices) {
        std::vector<Choice> choices;
        for (const auto& c : j["choices"]) choices.push_back({c.get<std::string>(), {}});
        raw.inst.choices = std::move(choices);
      }
      if (j.contains("rationales") && !j["rationales"].is_null()) {
        for (auto& [name, text] : j["rationales"].items()) {
          raw.inst.rationales[name] = {text.get<std::string>(), {}, VariantKindFromName(name)};
        }
      }
      if (fixed_mode && *fixed_mode == has_choices) fail("mixed fixed and per-instance labels");
      fixed_mode = !has_choices;
    } catch (const DataError&) {
      throw;
    } catch (const std::exception& e) {
      fail(std::string("schema violation: ") + e.what());
    }
    raws.push_back(std::move(raw));
  }
  ds.label_space.mode = fixed_mode.value_or(true) ? LabelMode::kFixed : LabelMode::kPerInstance;
  if (ds.label_space.mode == LabelMode::kFixed) {
    if (fixed_labels) {
      ds.label_space.labels = *fixed_labels;
    } else {
      std::set<std::string> seen;
      for (const Raw& r : raws) seen.insert(r.label);
      ds.label_space.labels.assign(seen.begin(), seen.end());
    }
  }
  for (Raw& r : raws) {
    int idx = -1;
    if (r.inst.choices) {
      for (size_t c = 0; c < r.inst.choices->size(); ++c) {
        if ((*r.inst.choices)[c].text == r.label) idx = static_cast<int>(c);
      }
    } else {
      idx = ds.label_space.Find(r.label);
    }
    if (idx < 0) {
      throw DataError("instance '" + r.inst.id + "': unknown label '" + r.label + "'");
    }
    r.inst.label = idx;
    ds.instances.push_back(std::move(r.inst));
  }
  Validate(ds);
  return ds;
}

Dataset LoadJsonl(const std::string& path, const std::vector<std::string>* fixed_labels) {
  return ParseJsonl(ReadFile(path), fixed_labels);
}

std::string SerializeJsonl(const Dataset& dataset) {
  std::string out;
  if (!dataset.provenance.empty()) {
    Json p = Json::object();
    for (const auto& [k, v] : dataset.provenance) p[k] = v;
    out += Json{{"provenance", p}}.dump() + "\n";
  }
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Instance& inst = dataset.instances[i];
    Json j = Json::object();
    j["id"] = inst.id;
    j["question"] = inst.question;
    if (inst.choices) {
      Json c = Json::array();
      for (const Choice& ch : *inst.choices) c.push_back(ch.text);
      j["choices"] = c;
    } else {
      j["choices"] = nullptr;
    }
    j["label"] = dataset.LabelText(i, inst.label);
    Json r = Json::object();
    for (const auto& [name, text] : inst.rationales) r[name] = text.text;
    j["rationales"] = r;
    out += j.dump() + "\n";
  }
  return out;
}

void SaveJsonl(const Dataset& dataset, const std::string& path) {
  WriteFileAtomic(path, SerializeJsonl(dataset));
}

RationaleText MakeLeaky(std::string_view label, std::string_view templ) {
  if (CountOccurrences(templ, "{label}") != 1) {
    throw ConfigError("leaky template needs exactly one {label} placeholder");
  }
  return {ReplaceAll(std::string(templ), "{label}", label), {}, VariantKind::kLeaky};
}

RationaleText MakeGoldLeaky(const RationaleText& gold, const RationaleText& leaky) {
  RationaleText out;
  out.kind = VariantKind::kGoldLeaky;
  if (gold.text.empty()) {
    out.text = leaky.text;
  } else if (leaky.text.empty()) {
    out.text = gold.text;
  } else {
    out.text = gold.text + " " + leaky.text;
  }
  out.tokens = gold.tokens;
  out.tokens.insert(out.tokens.end(), leaky.tokens.begin(), leaky.tokens.end());
  return out;
}

RationaleText MakeVacuous(std::string_view question, std::string_view label,
                          std::string_view declarative_template,
                          const std::map<std::string, std::string>& slots) {
  std::string q = Trim(question);
  while (!q.empty() && (q.back() == '?' || std::isspace(static_cast<unsigned char>(q.back())))) {
    q.pop_back();
  }
  std::string text(declarative_template);
  text = ReplaceAll(text, "{label}", Lower(label));
  text = ReplaceAll(text, "{question}", q);
  for (const auto& [key, value] : slots) text = ReplaceAll(text, "{" + key + "}", value);
  const size_t open = text.find('{');
  if (open != std::string::npos && text.find('}', open) != std::string::npos) {
    throw ConfigError("unresolved slot in vacuous template: " + std::string(declarative_template));
  }
  return {text, {}, VariantKind::kVacuous};
}

SplitResult Split(const Dataset& dataset, std::array<double, 3> ratios, uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw ConfigError("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  std::map<int, std::vector<size_t>> groups;
  for (size_t i = 0; i < dataset.size(); ++i) groups[dataset.instances[i].label].push_back(i);
  Rng rng(seed);
  std::array<std::vector<size_t>, 3> picked;
  for (auto& [label, idx] : groups) {
    rng.Shuffle(std::span<size_t>(idx));
    const size_t n = idx.size();
    const size_t n_train = static_cast<size_t>(std::llround(ratios[0] * static_cast<double>(n)));
    const size_t n_val = std::min(
        n - std::min(n, n_train), static_cast<size_t>(std::llround(ratios[1] * static_cast<double>(n))));
    const size_t counts[3] = {std::min(n, n_train), n_val, n - std::min(n, n_train) - n_val};
    for (int s = 0; s < 3; ++s) {
      if (ratios[s] > 0 && counts[s] == 0) {
        throw DataError("dataset too small to stratify label group " + std::to_string(label));
      }
    }
    size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      picked[s].insert(picked[s].end(), idx.begin() + pos, idx.begin() + pos + counts[s]);
      pos += counts[s];
    }
  }
  SplitResult out;
  Dataset* parts[3] = {&out.train, &out.val, &out.test};
  const SplitTag tags[3] = {SplitTag::kTrain, SplitTag::kVal, SplitTag::kTest};
  for (int s = 0; s < 3; ++s) {
    std::sort(picked[s].begin(), picked[s].end());
    parts[s]->label_space = dataset.label_space;
    parts[s]->split = tags[s];
    for (size_t i : picked[s]) parts[s]->instances.push_back(dataset.instances[i]);
  }
  return out;
}

}  // namespace rateval
