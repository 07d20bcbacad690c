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

#include "rateval/attribution.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "rateval/errors.h"
#include "rateval/io.h"
#include "rateval/random.h"
#include "rateval/views.h"

namespace rateval {

AttributionMap IntegratedGradients(const Model& model, const View& view, int target, int steps) {
  if (steps < 1) throw ConfigError("integrated gradients needs steps >= 1");
  const EmbeddedInput input = model.Embed(view);
  const int d = input.rows.cols;
  AttributionMap map;
  map.target = target;
  map.steps = steps;
  for (size_t j = 0; j < view.rationale.size(); ++j) {
    map.tokens.push_back({view.rationale[j], static_cast<int>(j), 0.0});
  }

  EmbeddedInput path = input;
  auto scale_rationale = [&](double alpha) {
    for (int r = 0; r < input.rows.rows; ++r) {
      if (!input.origin[static_cast<size_t>(r)].from_rationale()) continue;
      const double* src = input.rows.row(r);
      double* dst = path.rows.row(r);
      for (int k = 0; k < d; ++k) dst[k] = alpha * src[k];
    }
  };

  Matrix avg_grad(input.rows.rows, d);
  for (int s = 0; s < steps; ++s) {
    scale_rationale((s + 0.5) / steps);
    const Matrix g = model.LogitGradient(path, view, target);
    for (size_t k = 0; k < g.data.size(); ++k) avg_grad.data[k] += g.data[k];
  }
  for (double& v : avg_grad.data) v /= steps;

  for (int r = 0; r < input.rows.rows; ++r) {
    const RowOrigin& o = input.origin[static_cast<size_t>(r)];
    if (!o.from_rationale()) continue;
    double score = 0;
    for (int k = 0; k < d; ++k) score += input.rows.at(r, k) * avg_grad.at(r, k);
    if (o.first >= 0 && o.second >= 0) {
      map.tokens[static_cast<size_t>(o.first)].score += 0.5 * score;
      map.tokens[static_cast<size_t>(o.second)].score += 0.5 * score;
    } else {
      map.tokens[static_cast<size_t>(o.first >= 0 ? o.first : o.second)].score += score;
    }
  }

  const double f_x = model.ForwardFromEmbeddings(input, view).at(static_cast<size_t>(target));
  scale_rationale(0.0);
  const double f_0 = model.ForwardFromEmbeddings(path, view).at(static_cast<size_t>(target));
  map.output_delta = f_x - f_0;
  double total = 0;
  for (const TokenAttribution& t : map.tokens) total += t.score;
  map.residual = total - map.output_delta;
  return map;
}

GlobalAttribution AggregateGlobal(const std::vector<AttributionMap>& maps,
                                  const std::vector<TokenId>& label_keys) {
  if (label_keys.size() != maps.size()) throw DataError("label_keys must align with maps");
  GlobalAttribution g;
  std::map<TokenId, double> sums;
  std::map<TokenId, std::map<TokenId, double>> group_sums;
  for (size_t i = 0; i < maps.size(); ++i) {
    for (const TokenAttribution& t : maps[i].tokens) {
      sums[t.token] += t.score;
      ++g.overall[t.token].count;
      group_sums[label_keys[i]][t.token] += t.score;
      ++g.by_label[label_keys[i]][t.token].count;
    }
  }
  for (auto& [tok, stat] : g.overall) stat.mean = sums[tok] / static_cast<double>(stat.count);
  for (auto& [key, stats] : g.by_label) {
    for (auto& [tok, stat] : stats) stat.mean = group_sums[key][tok] / static_cast<double>(stat.count);
  }
  return g;
}

std::string SelectionRule::Describe() const {
  char buf[96];
  if (kind == Kind::kThreshold) {
    std::snprintf(buf, sizeof(buf), "threshold=%g%s", threshold, absolute ? ",abs" : "");
  } else {
    std::snprintf(buf, sizeof(buf), "top_k=%d,floor=%g%s", top_k, min_score, absolute ? ",abs" : "");
  }
  return buf;
}

std::vector<MaskSpan> MergeRuns(const std::vector<bool>& flags) {
  std::vector<MaskSpan> spans;
  for (size_t i = 0; i < flags.size();) {
    if (!flags[i]) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < flags.size() && flags[j]) ++j;
    spans.push_back({static_cast<int>(i), static_cast<int>(j - i)});
    i = j;
  }
  return spans;
}

std::set<TokenId> SelectTypes(const GlobalAttribution& global, const SelectionRule& rule) {
  auto rank_score = [&](double mean) { return rule.absolute ? std::abs(mean) : mean; };
  std::set<TokenId> types;
  if (rule.kind == SelectionRule::Kind::kThreshold) {
    if (!(rule.threshold > 0)) throw ConfigError("selection threshold must be > 0");
    for (const auto& [tok, stat] : global.overall) {
      if (rank_score(stat.mean) > rule.threshold) types.insert(tok);
    }
    return types;
  }
  if (rule.top_k < 1) throw ConfigError("top_k must be >= 1");
  for (const auto& [key, stats] : global.by_label) {
    std::vector<std::pair<double, TokenId>> ranked;
    for (const auto& [tok, stat] : stats) {
      const double s = rank_score(stat.mean);
      if (s > rule.min_score) ranked.emplace_back(s, tok);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (size_t r = 0; r < ranked.size() && r < static_cast<size_t>(rule.top_k); ++r) {
      types.insert(ranked[r].second);
    }
  }
  return types;
}

LeakSelection ApplySelection(const LeakSelection& selection, const Dataset& dataset,
                             const std::string& variant) {
  LeakSelection out;
  out.rule = selection.rule;
  out.types = selection.types;
  for (const Instance& inst : dataset.instances) {
    LeakMask mask;
    mask.id = inst.id;
    const TokenSeq& r = inst.RationaleTokens(variant);
    mask.selected.resize(r.size());
    for (size_t j = 0; j < r.size(); ++j) mask.selected[j] = out.types.count(r[j]) > 0;
    mask.spans = MergeRuns(mask.selected);
    out.masks.push_back(std::move(mask));
  }
  return out;
}

LeakSelection SelectLeaks(const GlobalAttribution& global, const SelectionRule& rule,
                          const Dataset& dataset, const std::string& variant) {
  LeakSelection sel;
  sel.rule = rule;
  sel.types = SelectTypes(global, rule);
  return ApplySelection(sel, dataset, variant);
}

TokenId LabelKey(const Dataset& dataset, size_t i, const Vocabulary& vocab) {
  const Instance& inst = dataset.instances.at(i);
  if (dataset.label_space.mode == LabelMode::kFixed) return vocab.LabelToken(inst.label);
  const TokenSeq& c = (*inst.choices).at(static_cast<size_t>(inst.label)).tokens;
  return c.empty() ? Vocabulary::kUnk : c.front();
}

DetectionConfig DefaultDetectionConfig() {
  DetectionConfig c;
  c.train.max_epochs = 3;
  c.train.patience = 3;
  c.train.batch_size = 64;
  c.train.optimizer.learning_rate = 0.05;
  return c;
}

DetectionResult DetectLeaks(const Dataset& train, const Dataset& val, const std::string& variant,
                            const Vocabulary& vocab, const DetectionConfig& config) {
  FamilyConfig family = config.family;
  if (train.label_space.mode == LabelMode::kPerInstance) family.architecture = Architecture::kBiEncoder;
  const ExampleSet train_ex = BuildExamples(train, Conditioning::RationaleOnly(), variant);
  const ExampleSet val_ex = BuildExamples(val, Conditioning::RationaleOnly(), variant);
  DetectionResult out;
  out.small_model = TrainErm(family, vocab.size(), std::max(2, NumFixedLabels(train)), train_ex,
                             val_ex, config.train);
  std::vector<TokenId> keys;
  for (size_t i = 0; i < train.size(); ++i) {
    AttributionMap m = IntegratedGradients(out.small_model.model(), train_ex[i].view,
                                           train_ex[i].label, config.ig_steps);
    m.id = train.instances[i].id;
    out.maps.push_back(std::move(m));
    keys.push_back(LabelKey(train, i, vocab));
  }
  out.global = AggregateGlobal(out.maps, keys);
  out.selection = SelectLeaks(out.global, config.rule, train, variant);
  return out;
}

std::string AttributionDumpJsonl(const std::vector<AttributionMap>& maps, const Vocabulary& vocab) {
  std::string out;
  for (const AttributionMap& m : maps) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    std::vector<std::string> toks;
    std::vector<double> scores;
    for (const TokenAttribution& t : m.tokens) {
      toks.push_back(vocab.Token(t.token));
      scores.push_back(t.score);
    }
    j["tokens"] = toks;
    j["scores"] = scores;
    j["residual"] = m.residual;
    out += j.dump() + "\n";
  }
  return out;
}

std::string GlobalAttributionTsv(const GlobalAttribution& global, const Vocabulary& vocab) {
  std::vector<std::pair<TokenId, AttributionStat>> rows(global.overall.begin(), global.overall.end());
  std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
    if (a.second.mean != b.second.mean) return a.second.mean > b.second.mean;
    return vocab.Token(a.first) < vocab.Token(b.first);
  });
  std::string out = "token\tmean\tcount\n";
  for (const auto& [tok, stat] : rows) {
    out += vocab.Token(tok) + "\t" + FormatDouble(stat.mean, 9) + "\t" + std::to_string(stat.count) + "\n";
  }
  return out;
}

}  // namespace rateval
