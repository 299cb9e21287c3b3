// Copyright 2026 The dissipmem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DISSIPMEM_RNG_HPP
#define DISSIPMEM_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>

namespace dissipmem {

/// Per-trajectory random stream: xoshiro256++ seeded through SplitMix64
/// from the pair (seed, stream). Streams with distinct keys are
/// statistically independent, so trajectories can run on any thread in any
/// order and still reproduce bit-for-bit.
class Rng {
 public:
  Rng(uint64_t seed, uint64_t stream) {
    // Mix the key so (seed, stream) and (seed, stream+1) start far apart.
    uint64_t x = seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    for (auto& word : state_) {
      x += 0x9e3779b97f4a7c15ULL;
      uint64_t z = x;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      word = z ^ (z >> 31);
    }
    if (state_[0] == 0 && state_[1] == 0 && state_[2] == 0 && state_[3] == 0)
      state_[0] = 1;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n) without modulo bias (Lemire's method).
  uint32_t next_below(uint32_t n) {
    uint64_t x = next_u64() >> 32;
    uint64_t m = x * n;
    auto low = static_cast<uint32_t>(m);
    if (low < n) {
      const uint32_t threshold = (0u - n) % n;
      while (low < threshold) {
        x = next_u64() >> 32;
        m = x * n;
        low = static_cast<uint32_t>(m);
      }
    }
    return static_cast<uint32_t>(m >> 32);
  }

  /// Poisson sample by Knuth's product method, chunked so the running
  /// product never underflows for large means.
  uint64_t next_poisson(double mean) {
    uint64_t count = 0;
    while (mean > 16.0) {
      count += poisson_knuth(16.0);
      mean -= 16.0;
    }
    if (mean > 0.0) count += poisson_knuth(mean);
    return count;
  }

  std::array<uint64_t, 4> state() const { return state_; }
  void set_state(const std::array<uint64_t, 4>& s) { state_ = s; }

 private:
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t poisson_knuth(double mean) {
    const double limit = std::exp(-mean);
    uint64_t k = 0;
    double product = 1.0;
    do {
      ++k;
      product *= next_double();
    } while (product > limit);
    return k - 1;
  }

  std::array<uint64_t, 4> state_{};
};

}  // namespace dissipmem

#endif  // DISSIPMEM_RNG_HPP
