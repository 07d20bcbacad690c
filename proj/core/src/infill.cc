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

#include "rateval/infill.h"

#include <cstdio>

#include "rateval/errors.h"
#include "rateval/random.h"

namespace rateval {
namespace {

TokenId LabelKeyToken(const TokenSeq& label_tokens) {
  return label_tokens.empty() ? kBoundary : label_tokens.front();
}

std::string HashDataset(const Dataset& d) {
  uint64_t h = Fnv1a64(SerializeJsonl(d));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Masked rationale walk: calls `on_kept(token)` for unmasked tokens and
// `on_span(span, left, right)` for each masked span.
template <typename Kept, typename Span>
void WalkSpans(const TokenSeq& r, const LeakMask& mask, Kept on_kept, Span on_span) {
  size_t next = 0;
  for (size_t j = 0; j < r.size();) {
    if (next < mask.spans.size() && static_cast<size_t>(mask.spans[next].start) == j) {
      const MaskSpan& s = mask.spans[next++];
      const size_t end = j + static_cast<size_t>(s.length);
      const TokenId left = j > 0 ? r[j - 1] : kBoundary;
      const TokenId right = end < r.size() ? r[end] : kBoundary;
      on_span(TokenSeq(r.begin() + static_cast<long>(j), r.begin() + static_cast<long>(end)), left, right);
      j = end;
    } else {
      on_kept(r[j]);
      ++j;
    }
  }
}

void CheckMasks(const Dataset& dataset, const LeakSelection& masks) {
  if (masks.masks.size() != dataset.size()) throw DataError("masks do not align with the dataset");
  for (size_t i = 0; i < dataset.size(); ++i) {
    if (masks.masks[i].id != dataset.instances[i].id) {
      throw DataError("mask for '" + masks.masks[i].id + "' does not match instance '" +
                      dataset.instances[i].id + "'");
    }
  }
}

}  // namespace

TokenSeq LabelTokens(const Dataset& dataset, size_t i, int e, const Vocabulary& vocab) {
  if (dataset.label_space.mode == LabelMode::kFixed) return {vocab.LabelToken(e)};
  const auto& choices = *dataset.instances.at(i).choices;
  if (e < 0 || static_cast<size_t>(e) >= choices.size()) {
    throw DataError("choice index out of range for '" + dataset.instances[i].id + "'");
  }
  return choices[static_cast<size_t>(e)].tokens;
}

MaskedCorpus BuildMaskedExamples(const Dataset& dataset, const std::string& variant,
                                 const LeakSelection& masks, const Vocabulary& vocab) {
  CheckMasks(dataset, masks);
  MaskedCorpus out;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Instance& inst = dataset.instances[i];
    const LeakMask& mask = masks.masks[i];
    if (mask.empty()) {
      out.passthrough_ids.push_back(inst.id);
      continue;
    }
    MaskedExample ex;
    ex.id = inst.id;
    ex.label_tokens = LabelTokens(dataset, i, inst.label, vocab);
    ex.conditioning = ex.label_tokens;
    ex.conditioning.insert(ex.conditioning.end(), inst.question_tokens.begin(), inst.question_tokens.end());
    int next_sentinel = 0;
    WalkSpans(
        inst.RationaleTokens(variant), mask, [&](TokenId t) { ex.conditioning.push_back(t); },
        [&](TokenSeq span, TokenId left, TokenId right) {
          const TokenId s = vocab.Sentinel(next_sentinel++ % vocab.num_sentinels());
          ex.conditioning.push_back(s);
          ex.targets.push_back({s, std::move(span), left, right});
        });
    out.examples.push_back(std::move(ex));
  }
  return out;
}

Infiller::SpanCode Infiller::EncodeSpan(const TokenSeq& label_tokens, const TokenSeq& span) const {
  SpanCode code;
  for (TokenId t : span) {
    int64_t c = t;
    for (size_t j = 0; j < label_tokens.size(); ++j) {
      if (label_tokens[j] == t) {
        c = -static_cast<int64_t>(j) - 1;  // copy slot j
        break;
      }
    }
    code.push_back(c);
  }
  return code;
}

TokenSeq Infiller::DecodeSpan(const TokenSeq& label_tokens, const SpanCode& code) const {
  TokenSeq span;
  for (int64_t c : code) {
    if (c >= 0) {
      span.push_back(static_cast<TokenId>(c));
    } else {
      const size_t slot = static_cast<size_t>(-c - 1);
      // A copy slot beyond the conditioning label decodes to UNK.
      span.push_back(slot < label_tokens.size() ? label_tokens[slot] : Vocabulary::kUnk);
    }
  }
  return span;
}

void Infiller::Observe(const TokenSeq& label_tokens, const SpanTarget& target) {
  if (target.span.empty() || static_cast<int>(target.span.size()) > config_.max_span) return;
  const SpanCode code = EncodeSpan(label_tokens, target.span);
  const int64_t key = LabelKeyToken(label_tokens);
  counts_[{key, target.left, target.right}][code] += 1.0;
  counts_[{key}][code] += 1.0;
  candidates_[code] += 1.0;
}

const std::map<Infiller::SpanCode, double>* Infiller::Lookup(const TokenSeq& label_tokens,
                                                             TokenId left, TokenId right) const {
  const int64_t key = LabelKeyToken(label_tokens);
  for (const ContextKey& ctx : {ContextKey{key, left, right}, ContextKey{key}}) {
    auto it = counts_.find(ctx);
    if (it != counts_.end()) return &it->second;
  }
  return &candidates_;
}

TokenSeq Infiller::Decode(const TokenSeq& label_tokens, TokenId left, TokenId right) const {
  const std::map<SpanCode, double>* counts = Lookup(label_tokens, left, right);
  const TokenSeq* best = nullptr;
  TokenSeq best_span;
  double best_count = -1;
  for (const auto& [code, n] : *counts) {
    TokenSeq span = DecodeSpan(label_tokens, code);
    if (n > best_count || (n == best_count && span < best_span)) {
      best_count = n;
      best_span = std::move(span);
      best = &best_span;
    }
  }
  return best ? best_span : TokenSeq{};
}

double Infiller::Probability(const TokenSeq& label_tokens, TokenId left, TokenId right,
                             const TokenSeq& span) const {
  const std::map<SpanCode, double>* counts = Lookup(label_tokens, left, right);
  const double vocab_size = static_cast<double>(std::max<size_t>(1, candidates_.size()));
  double total = 0;
  for (const auto& [code, n] : *counts) total += n;
  auto it = counts->find(EncodeSpan(label_tokens, span));
  const double n = it == counts->end() ? 0.0 : it->second;
  return (n + config_.alpha) / (total + config_.alpha * vocab_size);
}

std::string Infiller::Fingerprint() const {
  std::string blob;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "a=%.17g;m=%d;", config_.alpha, config_.max_span);
  blob += buf;
  for (const auto& [ctx, counts] : counts_) {
    for (int64_t c : ctx) blob += std::to_string(c) + ",";
    blob += ":";
    for (const auto& [code, n] : counts) {
      for (int64_t c : code) blob += std::to_string(c) + ",";
      std::snprintf(buf, sizeof(buf), "=%.17g;", n);
      blob += buf;
    }
  }
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(Fnv1a64(blob)));
  return buf;
}

Infiller TrainInfiller(const std::vector<MaskedExample>& examples, const InfillerConfig& config) {
  if (examples.empty()) throw ConfigError("train_infiller needs at least one masked example");
  if (!(config.alpha > 0) || config.max_span < 1) {
    throw ConfigError("infiller needs alpha > 0 and max_span >= 1");
  }
  Infiller infiller(config);
  for (const MaskedExample& ex : examples) {
    for (const SpanTarget& t : ex.targets) infiller.Observe(ex.label_tokens, t);
  }
  return infiller;
}

Environment GenerateCounterfactuals(const Dataset& dataset, const std::string& variant,
                                    const LeakSelection& masks, const Infiller& infiller, int e,
                                    const Vocabulary& vocab, bool reuse_original) {
  CheckMasks(dataset, masks);
  Environment env;
  env.label_value = e;
  env.label_text = dataset.label_space.mode == LabelMode::kFixed
                       ? dataset.label_space.labels.at(static_cast<size_t>(e))
                       : "choice-" + std::to_string(e);
  env.data = dataset;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const Instance& inst = dataset.instances[i];
    const LeakMask& mask = masks.masks[i];
    if (mask.empty() || (reuse_original && inst.label == e)) continue;
    auto it = env.data.instances[i].rationales.find(variant);
    if (it == env.data.instances[i].rationales.end()) continue;
    const TokenSeq label_tokens = LabelTokens(dataset, i, e, vocab);
    TokenSeq rewritten;
    WalkSpans(
        inst.RationaleTokens(variant), mask, [&](TokenId t) { rewritten.push_back(t); },
        [&](const TokenSeq&, TokenId left, TokenId right) {
          const TokenSeq fill = infiller.Decode(label_tokens, left, right);
          rewritten.insert(rewritten.end(), fill.begin(), fill.end());
        });
    it->second.text = vocab.Decode(rewritten);
    it->second.tokens = std::move(rewritten);
  }
  env.data.provenance = {
      {"source", HashDataset(dataset)},
      {"variant", variant},
      {"mask_rule", masks.rule.Describe()},
      {"infiller", infiller.Fingerprint()},
      {"environment", env.label_text},
      {"reuse_original", reuse_original ? "true" : "false"},
  };
  return env;
}

std::vector<Environment> GenerateEnvironments(const Dataset& dataset, const std::string& variant,
                                              const LeakSelection& masks, const Infiller& infiller,
                                              const Vocabulary& vocab, bool reuse_original) {
  int count = 0;
  if (dataset.label_space.mode == LabelMode::kFixed) {
    count = static_cast<int>(dataset.label_space.labels.size());
  } else {
    for (size_t i = 0; i < dataset.size(); ++i) {
      const int n = dataset.NumLabels(i);
      if (i > 0 && n != count) throw DataError("open-label environments need equal choice counts");
      count = n;
    }
  }
  std::vector<Environment> envs;
  for (int e = 0; e < count; ++e) {
    envs.push_back(GenerateCounterfactuals(dataset, variant, masks, infiller, e, vocab, reuse_original));
  }
  return envs;
}

}  // namespace rateval
