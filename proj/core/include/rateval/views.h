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

#ifndef RATEVAL_VIEWS_H_
#define RATEVAL_VIEWS_H_

#include <string>

#include "rateval/corpus.h"
#include "rateval/training.h"

namespace rateval {

// Which inputs a predictor conditions on; absent inputs are fed as null.
// The rationale slot carries vacuous ++ rationale when both are set.
struct Conditioning {
  bool question = false;
  bool vacuous = false;
  bool rationale = false;

  static Conditioning None() { return {}; }
  static Conditioning Question() { return {true, false, false}; }
  static Conditioning QuestionRationale() { return {true, false, true}; }
  static Conditioning RationaleOnly() { return {false, false, true}; }
  static Conditioning Vacuous() { return {false, true, false}; }
  static Conditioning VacuousRationale() { return {false, true, true}; }

  std::string Describe() const;
};

inline constexpr char kVacuousVariant[] = "vacuous";

// One example per instance. Choices are attached in open-label mode.
ExampleSet BuildExamples(const Dataset& dataset, const Conditioning& conditioning,
                         const std::string& variant,
                         const std::string& vacuous_variant = kVacuousVariant);

// Number of outputs for fixed mode, 0 (per-view) in open-label mode.
int NumFixedLabels(const Dataset& dataset);

}  // namespace rateval

#endif  // RATEVAL_VIEWS_H_
