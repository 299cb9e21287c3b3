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

#include "dissipmem/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace dissipmem {

namespace {

constexpr char kCheckpointMagic[8] = {'D', 'M', 'E', 'M', '1', 0, 0, 0};

inline void flip(StabilizerConfig& config, int site, HomologyTracker* tracker) {
  config.flip_site(site);
  if (tracker) tracker->on_flip(config.geometry(), site);
}

}  // namespace

void single_jump(StabilizerConfig& config, const RateTable& rates, Rng& rng, JumpCounts* counts,
                 HomologyTracker* tracker) {
  const int site = static_cast<int>(rng.next_below(static_cast<uint32_t>(config.geometry().n_sites)));
  // One uniform on [0, total) decides the branch; within the correction
  // band its offset is re-used as the acceptance draw (it is uniform on
  // [0, budget) conditioned on landing there).
  const double x = rng.next_double() * rates.total_site_rate();
  const double noise = rates.noise();
  if (x < noise) {
    flip(config, site, tracker);
    if (counts) ++counts->noise;
    return;
  }
  const double budget = rates.correction_budget();
  if (x < noise + budget) {
    if (x - noise < rates.rate(config.violated_count(site))) {
      flip(config, site, tracker);
      if (counts) ++counts->correction;
    } else {
      if (counts) ++counts->noop;
    }
    return;
  }
  // Field branch: flips only spins anti-aligned with the +Z reference.
  if (config.site_bit(site)) {
    flip(config, site, tracker);
    if (counts) ++counts->field;
  } else {
    if (counts) ++counts->noop;
  }
}

void global_step(StabilizerConfig& config, const RateTable& rates, Rng& rng, JumpCounts* counts,
                 HomologyTracker* tracker) {
  const int n = config.geometry().n_sites;
  for (int i = 0; i < n; ++i) single_jump(config, rates, rng, counts, tracker);
}

void evolve_constant_rate(StabilizerConfig& config, const RateTable& rates, Rng& rng, double t,
                          JumpCounts* counts, HomologyTracker* tracker) {
  if (t < 0.0) throw std::invalid_argument("evolve_constant_rate: negative time span");
  if (t == 0.0) return;
  const double mean = config.geometry().n_sites * rates.total_site_rate() * t;
  const uint64_t events = rng.next_poisson(mean);
  for (uint64_t i = 0; i < events; ++i) single_jump(config, rates, rng, counts, tracker);
}

TrajectoryRecord run_trajectory(const StabilizerConfig& initial, const RateTable& rates,
                                const EngineConfig& config, int traj_index) {
  if (config.t_max <= 0.0) throw std::invalid_argument("run_trajectory: t_max must be positive");
  if (config.record_stride < 1)
    throw std::invalid_argument("run_trajectory: record_stride must be >= 1");

  const double dt = rates.dt();
  const int64_t total_steps = std::llround(config.t_max / dt);
  const int64_t burn_steps = std::llround(config.burn_in / dt);

  TrajectoryRecord record{.times = {},
                          .magnetization = {},
                          .mean_stabilizer = {},
                          .probe = {},
                          .final_config = initial,
                          .tracker = {},
                          .jumps = {},
                          .decode = {}};
  const int64_t n_samples =
      burn_steps <= total_steps ? (total_steps - burn_steps) / config.record_stride + 1 : 0;
  record.times.reserve(n_samples);
  record.magnetization.reserve(n_samples);
  record.mean_stabilizer.reserve(n_samples);
  record.probe.reserve(n_samples);

  Rng rng(config.seed, static_cast<uint64_t>(traj_index));
  StabilizerConfig& state = record.final_config;
  HomologyTracker* tracker =
      state.geometry().model == Model::Toric2D ? &record.tracker : nullptr;

  auto sample = [&](int64_t step) {
    const Observables obs = state.observables();
    record.times.push_back(static_cast<double>(step) * dt);
    record.magnetization.push_back(obs.magnetization);
    record.mean_stabilizer.push_back(obs.mean_stabilizer);
    record.probe.push_back(static_cast<int8_t>(obs.probe_spin));
  };

  for (int64_t step = 0; step <= total_steps; ++step) {
    if (step >= burn_steps && (step - burn_steps) % config.record_stride == 0) sample(step);
    if (step == total_steps) break;
    if (config.scheme == Scheme::GlobalStepChannel)
      global_step(state, rates, rng, &record.jumps, tracker);
    else
      evolve_constant_rate(state, rates, rng, dt, &record.jumps, tracker);
  }
  return record;
}

void parallel_for_index(int count, int n_threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  n_threads = std::max(1, std::min(n_threads, count));
  if (n_threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  int first_error_index = count;
  auto worker = [&] {
    while (true) {
      const int index = next.fetch_add(1);
      if (index >= count) return;
      try {
        fn(index);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (index < first_error_index) {
          first_error_index = index;
          first_error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& thread : pool) thread.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<TrajectoryRecord> run_ensemble(const StabilizerConfig& initial,
                                           const RateTable& rates, const EngineConfig& config,
                                           int n_threads) {
  if (config.n_trajectories < 1)
    throw std::invalid_argument("run_ensemble: n_trajectories must be >= 1");
  std::vector<std::optional<TrajectoryRecord>> slots(config.n_trajectories);
  parallel_for_index(config.n_trajectories, n_threads,
                     [&](int index) { slots[index] = run_trajectory(initial, rates, config, index); });
  std::vector<TrajectoryRecord> records;
  records.reserve(slots.size());
  for (auto& slot : slots) records.push_back(std::move(*slot));
  return records;
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const auto scheme = static_cast<uint32_t>(checkpoint.scheme);
  out.write(reinterpret_cast<const char*>(&scheme), sizeof(scheme));
  out.write(reinterpret_cast<const char*>(&checkpoint.traj_index), sizeof(checkpoint.traj_index));
  out.write(reinterpret_cast<const char*>(&checkpoint.seed), sizeof(checkpoint.seed));
  out.write(reinterpret_cast<const char*>(&checkpoint.event_count), sizeof(checkpoint.event_count));
  out.write(reinterpret_cast<const char*>(checkpoint.rng_state.data()), sizeof(checkpoint.rng_state));
  checkpoint.config.write(out);
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in, const LatticeGeometry& geo) {
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  uint32_t scheme = 0;
  uint32_t traj_index = 0;
  uint64_t seed = 0;
  uint64_t event_count = 0;
  std::array<uint64_t, 4> rng_state{};
  in.read(reinterpret_cast<char*>(&scheme), sizeof(scheme));
  in.read(reinterpret_cast<char*>(&traj_index), sizeof(traj_index));
  in.read(reinterpret_cast<char*>(&seed), sizeof(seed));
  in.read(reinterpret_cast<char*>(&event_count), sizeof(event_count));
  in.read(reinterpret_cast<char*>(rng_state.data()), sizeof(rng_state));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  Checkpoint checkpoint(StabilizerConfig::read(in, geo));
  checkpoint.scheme = static_cast<Scheme>(scheme);
  checkpoint.traj_index = traj_index;
  checkpoint.seed = seed;
  checkpoint.event_count = event_count;
  checkpoint.rng_state = rng_state;
  return checkpoint;
}

}  // namespace dissipmem
