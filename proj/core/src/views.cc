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

#include "rateval/views.h"

#include "rateval/errors.h"

namespace rateval {

std::string Conditioning::Describe() const {
  std::string out;
  auto add = [&](const char* part) {
    if (!out.empty()) out += "+";
    out += part;
  };
  if (question) add("x");
  if (vacuous) add("b");
  if (rationale) add("r");
  return out.empty() ? "none" : out;
}

ExampleSet BuildExamples(const Dataset& dataset, const Conditioning& conditioning,
                         const std::string& variant, const std::string& vacuous_variant) {
  ExampleSet out;
  out.reserve(dataset.size());
  const bool open = dataset.label_space.mode == LabelMode::kPerInstance;
  for (const Instance& inst : dataset.instances) {
    Example ex;
    ex.label = inst.label;
    if (conditioning.question) ex.view.question = inst.question_tokens;
    if (conditioning.vacuous) {
      const TokenSeq& b = inst.RationaleTokens(vacuous_variant);
      ex.view.rationale.insert(ex.view.rationale.end(), b.begin(), b.end());
    }
    if (conditioning.rationale) {
      const TokenSeq& r = inst.RationaleTokens(variant);
      ex.view.rationale.insert(ex.view.rationale.end(), r.begin(), r.end());
    }
    if (open) {
      for (const Choice& c : *inst.choices) ex.view.choices.push_back(c.tokens);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

int NumFixedLabels(const Dataset& dataset) {
  return dataset.label_space.mode == LabelMode::kFixed
             ? static_cast<int>(dataset.label_space.labels.size())
             : 0;
}

}  // namespace rateval
