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

#include "dissipmem/decoders.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace dissipmem {

namespace {

int axis_l1(int a, int b, int n) {
  const int direct = std::abs(a - b);
  return std::min(direct, n - direct);
}

// Signed step count along one axis from a to b: shortest wrap, ties at
// exactly n/2 broken toward +.
int axis_delta(int a, int b, int n) {
  const int forward = ((b - a) % n + n) % n;
  if (forward * 2 <= n) return forward;
  return forward - n;
}

constexpr int kExactMatchingLimit = 20;

// Exact minimum-weight perfect matching by memoized search over anyon
// subsets; always pairs the lowest remaining index first and scans partners
// in increasing order, so the reconstructed optimum is lexicographically
// smallest.
class ExactMatcher {
 public:
  ExactMatcher(const std::vector<int>& dist, int count)
      : dist_(dist), count_(count), best_(1u << count, kUnknown) {}

  int64_t solve(uint32_t mask) {
    if (mask == 0) return 0;
    int64_t& memo = best_[mask];
    if (memo != kUnknown) return memo;
    const int first = lowest_bit(mask);
    int64_t best = std::numeric_limits<int64_t>::max();
    for (int partner = first + 1; partner < count_; ++partner) {
      if (!(mask >> partner & 1u)) continue;
      const uint32_t rest = mask & ~(1u << first) & ~(1u << partner);
      best = std::min(best, dist_[first * count_ + partner] + solve(rest));
    }
    memo = best;
    return best;
  }

  Pairing reconstruct() {
    Pairing pairing;
    uint32_t mask = (count_ == 32 ? ~0u : (1u << count_) - 1u);
    while (mask != 0) {
      const int first = lowest_bit(mask);
      const int64_t total = solve(mask);
      for (int partner = first + 1; partner < count_; ++partner) {
        if (!(mask >> partner & 1u)) continue;
        const uint32_t rest = mask & ~(1u << first) & ~(1u << partner);
        if (dist_[first * count_ + partner] + solve(rest) == total) {
          pairing.emplace_back(first, partner);
          mask = rest;
          break;
        }
      }
    }
    return pairing;
  }

 private:
  static int lowest_bit(uint32_t mask) { return __builtin_ctz(mask); }
  static constexpr int64_t kUnknown = -1;

  const std::vector<int>& dist_;
  int count_;
  std::vector<int64_t> best_;
};

Pairing greedy_improve(const std::vector<int>& dist, int count) {
  std::vector<bool> used(count, false);
  Pairing pairing;
  for (int i = 0; i < count; ++i) {
    if (used[i]) continue;
    int best = -1;
    for (int j = i + 1; j < count; ++j)
      if (!used[j] && (best < 0 || dist[i * count + j] < dist[i * count + best])) best = j;
    used[i] = used[best] = true;
    pairing.emplace_back(i, best);
  }
  // Pair-swap descent: for (a,b),(c,d) try (a,c),(b,d) and (a,d),(b,c).
  bool improved = true;
  while (improved) {
    improved = false;
    for (size_t p = 0; p < pairing.size(); ++p) {
      for (size_t q = p + 1; q < pairing.size(); ++q) {
        auto [a, b] = pairing[p];
        auto [c, d] = pairing[q];
        const int current = dist[a * count + b] + dist[c * count + d];
        const int swap_ac = dist[a * count + c] + dist[b * count + d];
        const int swap_ad = dist[a * count + d] + dist[b * count + c];
        if (swap_ac < current && swap_ac <= swap_ad) {
          pairing[p] = {a, c};
          pairing[q] = {b, d};
          improved = true;
        } else if (swap_ad < current) {
          pairing[p] = {a, d};
          pairing[q] = {b, c};
          improved = true;
        }
      }
    }
  }
  for (auto& pair : pairing)
    if (pair.first > pair.second) std::swap(pair.first, pair.second);
  std::sort(pairing.begin(), pairing.end());
  return pairing;
}

}  // namespace

int torus_l1(std::pair<int, int> a, std::pair<int, int> b, int torus_size) {
  return axis_l1(a.first, b.first, torus_size) + axis_l1(a.second, b.second, torus_size);
}

DecodeOutcome decode_majority(const StabilizerConfig& config) {
  if (config.geometry().model != Model::Ising2D)
    throw std::invalid_argument("decode_majority: Ising2D configurations only");
  const int64_t down = config.flipped_sites();
  const int64_t up = config.geometry().n_sites - down;
  DecodeOutcome outcome;
  outcome.tie_flag = (up == down);
  outcome.logical_label = (down > up) ? 1 : 0;
  outcome.correction_weight = std::min(up, down);
  return outcome;
}

MatchingProblem extract_anyons(const StabilizerConfig& config) {
  if (config.geometry().model != Model::Toric2D)
    throw std::invalid_argument("extract_anyons: Toric2D configurations only");
  MatchingProblem problem;
  problem.torus_size = config.geometry().linear_size;
  for (int t = 0; t < config.geometry().n_stabilizers; ++t)
    if (config.syndrome_bit(t)) problem.anyons.push_back(config.geometry().star_coords(t));
  return problem;
}

Pairing decode_mwpm(const MatchingProblem& problem) {
  const int count = static_cast<int>(problem.anyons.size());
  if (count % 2 != 0)
    throw std::invalid_argument("decode_mwpm: invalid syndrome (odd anyon count)");
  if (count == 0) return {};
  std::vector<int> dist(static_cast<size_t>(count) * count, 0);
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < count; ++j)
      dist[i * count + j] = torus_l1(problem.anyons[i], problem.anyons[j], problem.torus_size);
  if (count <= kExactMatchingLimit) {
    ExactMatcher matcher(dist, count);
    matcher.solve((count == 32 ? ~0u : (1u << count) - 1u));
    return matcher.reconstruct();
  }
  return greedy_improve(dist, count);
}

int64_t pairing_weight(const MatchingProblem& problem, const Pairing& pairing) {
  int64_t weight = 0;
  for (auto [i, j] : pairing)
    weight += torus_l1(problem.anyons[i], problem.anyons[j], problem.torus_size);
  return weight;
}

DecodeOutcome apply_correction(StabilizerConfig& config, HomologyTracker& tracker,
                               const MatchingProblem& problem, const Pairing& pairing,
                               PathRouting routing) {
  const LatticeGeometry& geo = config.geometry();
  if (geo.model != Model::Toric2D)
    throw std::invalid_argument("apply_correction: Toric2D configurations only");
  const int n = geo.linear_size;
  DecodeOutcome outcome;

  auto flip = [&](int edge) {
    config.flip_site(edge);
    tracker.on_flip(geo, edge);
    ++outcome.correction_weight;
  };
  auto walk_x = [&](int& x, int y, int target_x) {
    int dx = axis_delta(x, target_x, n);
    for (; dx > 0; --dx, x = (x + 1) % n) flip(geo.edge_index(x, y, 0));
    for (; dx < 0; ++dx, x = (x + n - 1) % n) flip(geo.edge_index(x - 1, y, 0));
  };
  auto walk_y = [&](int x, int& y, int target_y) {
    int dy = axis_delta(y, target_y, n);
    for (; dy > 0; --dy, y = (y + 1) % n) flip(geo.edge_index(x, y, 1));
    for (; dy < 0; ++dy, y = (y + n - 1) % n) flip(geo.edge_index(x, y - 1, 1));
  };

  for (auto [i, j] : pairing) {
    auto [x, y] = problem.anyons[i];
    const auto [tx, ty] = problem.anyons[j];
    if (routing == PathRouting::XThenY) {
      walk_x(x, y, tx);
      walk_y(x, y, ty);
    } else {
      walk_y(x, y, ty);
      walk_x(x, y, tx);
    }
  }

  if (config.sum_syndrome() != 0)
    throw std::runtime_error("apply_correction: residual syndrome after correction");
  outcome.winding_x = tracker.winding_x;
  outcome.winding_y = tracker.winding_y;
  outcome.logical_label = outcome.winding_x | (outcome.winding_y << 1);
  return outcome;
}

DecodeOutcome decode_and_correct(StabilizerConfig& config, HomologyTracker& tracker) {
  const LatticeGeometry& geo = config.geometry();
  if (geo.model == Model::Ising2D) {
    DecodeOutcome outcome = decode_majority(config);
    const uint8_t minority_bit = outcome.logical_label == 0 ? 1 : 0;
    for (int s = 0; s < geo.n_sites; ++s)
      if (config.site_bit(s) == (minority_bit != 0)) config.flip_site(s);
    if (config.sum_syndrome() != 0)
      throw std::runtime_error("decode_and_correct: residual syndrome after majority flip");
    return outcome;
  }
  if (geo.model == Model::Toric2D) {
    const MatchingProblem problem = extract_anyons(config);
    return apply_correction(config, tracker, problem, decode_mwpm(problem));
  }
  throw std::invalid_argument("decode_and_correct: no single-shot decoder for this model");
}

double overlap_estimate(const std::vector<DecodeOutcome>& outcomes, Protocol protocol) {
  if (outcomes.empty()) throw std::invalid_argument("overlap_estimate: empty outcome list");
  int64_t kept = 0;
  for (const DecodeOutcome& outcome : outcomes) {
    if (protocol == Protocol::IsingMajority)
      kept += outcome.logical_label == 0;
    else
      kept += outcome.winding_y == 0;
  }
  return static_cast<double>(kept) / static_cast<double>(outcomes.size());
}

}  // namespace dissipmem
