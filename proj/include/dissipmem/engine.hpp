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

#ifndef DISSIPMEM_ENGINE_HPP
#define DISSIPMEM_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "dissipmem/decoders.hpp"
#include "dissipmem/lattice.hpp"
#include "dissipmem/rates.hpp"
#include "dissipmem/rng.hpp"

namespace dissipmem {

enum class Scheme { GlobalStepChannel, ConstantRateEvents };

struct EngineConfig {
  Scheme scheme = Scheme::GlobalStepChannel;
  uint64_t seed = 0;
  int n_trajectories = 1;
  double t_max = 0.0;
  int record_stride = 1;   // global steps between observable samples
  double burn_in = 0.0;    // time before the first recorded sample
};

struct JumpCounts {
  uint64_t noise = 0;
  uint64_t correction = 0;
  uint64_t field = 0;
  uint64_t noop = 0;
  uint64_t total() const { return noise + correction + field + noop; }
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<double> magnetization;
  std::vector<double> mean_stabilizer;
  std::vector<int8_t> probe;
  StabilizerConfig final_config;
  HomologyTracker tracker;
  JumpCounts jumps;
  std::optional<DecodeOutcome> decode;
};

/// One application of the single-jump channel: pick a site uniformly, then
/// with probability noise/total apply the noise flip, with probability
/// budget/total attempt the correction (accepted with probability
/// rate(k)/budget, otherwise a do-nothing jump), and with probability
/// field/total flip the site only if it is anti-aligned with the
/// reference. Uses one 32-bit draw for the site and one double for the
/// branch decision.
void single_jump(StabilizerConfig& config, const RateTable& rates, Rng& rng,
                 JumpCounts* counts = nullptr, HomologyTracker* tracker = nullptr);

/// n_sites single jumps = one global update (each site touched once on
/// average); advances time by dt = 1/(per-site total rate).
void global_step(StabilizerConfig& config, const RateTable& rates, Rng& rng,
                 JumpCounts* counts = nullptr, HomologyTracker* tracker = nullptr);

/// Exact constant-total-rate evolution for a time span t: the event count
/// is Poisson with mean n_sites * total_site_rate * t.
void evolve_constant_rate(StabilizerConfig& config, const RateTable& rates, Rng& rng, double t,
                          JumpCounts* counts = nullptr, HomologyTracker* tracker = nullptr);

/// Runs one seeded trajectory from the given initial configuration and
/// records observables every record_stride global steps once burn_in has
/// passed. The result is a pure function of (engine config, seed,
/// trajectory index).
TrajectoryRecord run_trajectory(const StabilizerConfig& initial, const RateTable& rates,
                                const EngineConfig& config, int traj_index);

/// Independent trajectories for indices 0..n-1. The output is identical
/// for any thread count; records land at their trajectory index.
std::vector<TrajectoryRecord> run_ensemble(const StabilizerConfig& initial,
                                           const RateTable& rates, const EngineConfig& config,
                                           int n_threads);

/// Deterministic work distribution used by ensemble runs and scans: calls
/// fn(index) for 0..count-1 from a pool of n_threads workers. Exceptions
/// are captured and rethrown on the caller thread (first by index).
void parallel_for_index(int count, int n_threads, const std::function<void(int)>& fn);

/// Trajectory checkpoint: enough state to resume evolution bit-for-bit.
struct Checkpoint {
  Scheme scheme = Scheme::GlobalStepChannel;
  uint64_t seed = 0;
  uint32_t traj_index = 0;
  uint64_t event_count = 0;
  std::array<uint64_t, 4> rng_state{};
  StabilizerConfig config;

  explicit Checkpoint(StabilizerConfig c) : config(std::move(c)) {}
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in, const LatticeGeometry& geo);

}  // namespace dissipmem

#endif  // DISSIPMEM_ENGINE_HPP
