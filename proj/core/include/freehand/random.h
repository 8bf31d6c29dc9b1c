// Copyright 2026 The Freehand Authors
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

// Counter-based seed derivation for reproducible parallel sweeps.

#ifndef FREEHAND_RANDOM_H_
#define FREEHAND_RANDOM_H_

#include <cstdint>
#include <initializer_list>

#include "freehand/mdp.h"

namespace freehand {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// seed_0 = master; seed_{k+1} = SplitMix64(seed_k ^ SplitMix64(counter_k)).
// A stream depends only on (master, counters), never on scheduling.
inline std::uint64_t DeriveSeed(std::uint64_t master,
                                std::initializer_list<std::uint64_t> counters) {
  std::uint64_t s = master;
  for (std::uint64_t c : counters) s = SplitMix64(s ^ SplitMix64(c));
  return s;
}

inline Rng DeriveRng(std::uint64_t master,
                     std::initializer_list<std::uint64_t> counters) {
  return Rng(DeriveSeed(master, counters));
}

}  // namespace freehand

#endif  // FREEHAND_RANDOM_H_
