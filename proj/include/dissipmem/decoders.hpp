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

#ifndef DISSIPMEM_DECODERS_HPP
#define DISSIPMEM_DECODERS_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "dissipmem/lattice.hpp"

namespace dissipmem {

struct DecodeOutcome {
  int logical_label = 0;  // Ising: majority bit; Toric2D: winding_x | winding_y<<1
  uint8_t winding_x = 0;
  uint8_t winding_y = 0;
  int64_t correction_weight = 0;
  bool tie_flag = false;
};

/// Excited-star positions on the torus, matched under the L1 metric.
struct MatchingProblem {
  int torus_size = 0;
  std::vector<std::pair<int, int>> anyons;  // (x, y) star coordinates
};

/// Torus L1 distance between two star coordinates.
int torus_l1(std::pair<int, int> a, std::pair<int, int> b, int torus_size);

/// Majority label of an Ising configuration relative to the all-up
/// reference: 0 if up-spins strictly outnumber down-spins, 1 if
/// outnumbered. Exact ties (even N) decode to 0 with tie_flag set.
/// Correction weight is the minority count. Rejects non-Ising configs.
DecodeOutcome decode_majority(const StabilizerConfig& config);

/// Excited stars of a Toric2D configuration as a matching problem.
MatchingProblem extract_anyons(const StabilizerConfig& config);

using Pairing = std::vector<std::pair<int, int>>;  // indices into anyons

/// Perfect matching of minimum total torus-L1 weight. Exact subset-DP
/// search for up to 20 anyons with lexicographically smallest optimal
/// pairing; beyond that a greedy-then-improve pass (pair swaps until no
/// total-weight decrease remains). Rejects odd anyon counts.
Pairing decode_mwpm(const MatchingProblem& problem);

int64_t pairing_weight(const MatchingProblem& problem, const Pairing& pairing);

enum class PathRouting { XThenY, YThenX };

/// Flips the correction chains for a MWPM pairing (Toric2D) along shortest
/// torus-L1 paths, or flips the minority domain (Ising2D). Ties at
/// distance exactly N/2 route toward the + direction. The syndrome must be
/// empty afterwards or an internal-consistency error is thrown. Returns
/// the decode outcome with winding parities read from the tracker.
DecodeOutcome apply_correction(StabilizerConfig& config, HomologyTracker& tracker,
                               const MatchingProblem& problem, const Pairing& pairing,
                               PathRouting routing = PathRouting::XThenY);

/// Majority decode + correction for Ising2D (tracker windings unused).
DecodeOutcome decode_and_correct(StabilizerConfig& config, HomologyTracker& tracker);

enum class Protocol {
  IsingMajority,  // start |up...up>; overlap = fraction decoding to label 0
  ToricWinding,   // start (|0,0>+|1,0>)/sqrt(2); the sectors differ by the
                  // horizontal dual X string, so a trajectory keeps overlap 1
                  // iff the accumulated Z cycle has even vertical winding
};

/// Ensemble overlap Tr[rho_i rho_f] estimated from per-trajectory decode
/// outcomes. Rejects empty outcome lists.
double overlap_estimate(const std::vector<DecodeOutcome>& outcomes, Protocol protocol);

}  // namespace dissipmem

#endif  // DISSIPMEM_DECODERS_HPP
