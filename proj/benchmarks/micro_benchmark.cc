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

#include <vector>

#include <benchmark/benchmark.h>

#include "rateval/attribution.h"
#include "rateval/infill.h"
#include "rateval/irm.h"
#include "rateval/model.h"
#include "rateval/random.h"

namespace rateval {
namespace {

constexpr int kVocab = 512;

View RandomView(Rng& rng, int question_len, int rationale_len) {
  View v;
  for (int i = 0; i < question_len; ++i) v.question.push_back(static_cast<TokenId>(3 + rng.Below(kVocab - 3)));
  for (int i = 0; i < rationale_len; ++i) v.rationale.push_back(static_cast<TokenId>(3 + rng.Below(kVocab - 3)));
  return v;
}

void BM_Forward(benchmark::State& state) {
  const FamilyConfig f{Architecture::kEmbeddingBag, 16, static_cast<int>(state.range(0)), 4096};
  auto m = MakeModel(f, kVocab, 2, 1);
  Rng rng(2);
  const View v = RandomView(rng, 8, 24);
  for (auto _ : state) benchmark::DoNotOptimize(m->Forward(v));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(2);

void BM_Backward(benchmark::State& state) {
  const FamilyConfig f{Architecture::kEmbeddingBag, 16, 2, 4096};
  auto m = MakeModel(f, kVocab, 2, 1);
  Rng rng(3);
  const View v = RandomView(rng, 8, 24);
  std::vector<Matrix> grads = m->ZeroGradients();
  const std::vector<double> dlogits{0.3, -0.3};
  for (auto _ : state) {
    m->Backward(v, dlogits, grads);
    benchmark::ClobberMemory();
  }
}
BENCHMARK(BM_Backward);

void BM_IntegratedGradients(benchmark::State& state) {
  const FamilyConfig f{Architecture::kEmbeddingBag, 16, 1, 4096};
  auto m = MakeModel(f, kVocab, 2, 1);
  Rng rng(4);
  const View v = RandomView(rng, 0, 16);
  for (auto _ : state) benchmark::DoNotOptimize(IntegratedGradients(*m, v, 0, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_IntegratedGradients)->Arg(8)->Arg(64);

void BM_InfillDecode(benchmark::State& state) {
  Infiller inf(InfillerConfig{});
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    SpanTarget t;
    t.span = {static_cast<TokenId>(3 + rng.Below(64))};
    t.left = static_cast<TokenId>(3 + rng.Below(16));
    t.right = static_cast<TokenId>(3 + rng.Below(16));
    inf.Observe({static_cast<TokenId>(rng.Below(2))}, t);
  }
  for (auto _ : state) benchmark::DoNotOptimize(inf.Decode({1}, 5, 7));
}
BENCHMARK(BM_InfillDecode);

void BM_IrmPenalty(benchmark::State& state) {
  Rng rng(6);
  std::vector<double> z(static_cast<size_t>(state.range(0)));
  for (double& v : z) v = rng.Uniform(-2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(IrmPenalty(z, 0));
}
BENCHMARK(BM_IrmPenalty)->Arg(2)->Arg(5);

}  // namespace
}  // namespace rateval

BENCHMARK_MAIN();
