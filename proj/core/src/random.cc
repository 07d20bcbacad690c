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

#include "rateval/random.h"

namespace rateval {

uint64_t Fnv1a64(std::string_view bytes, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t DeriveSeed(uint64_t master_seed, std::string_view stage) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((master_seed >> (8 * i)) & 0xff);
  uint64_t h = Fnv1a64(std::string_view(buf, 8));
  h = Fnv1a64("/", h);
  return Fnv1a64(stage, h);
}

uint64_t Rng::Below(uint64_t n) {
  // Largest multiple of n that fits; draws above it are rejected.
  const uint64_t limit = (~uint64_t{0}) - ((~uint64_t{0}) % n);
  while (true) {
    const uint64_t v = engine_();
    if (v < limit) return v % n;
  }
}

}  // namespace rateval
