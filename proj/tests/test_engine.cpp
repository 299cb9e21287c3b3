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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "dissipmem/engine.hpp"
#include "dissipmem/oracle.hpp"
#include "oracles.hpp"

using namespace dissipmem;

TEST_CASE("zero noise keeps the reference state absorbing") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.0);
  StabilizerConfig config(geo);
  Rng rng(3, 0);
  JumpCounts counts;
  for (int i = 0; i < 10000; ++i) single_jump(config, rates, rng, &counts);
  CHECK(config.flipped_sites() == 0);
  CHECK(counts.noise == 0);
  CHECK(counts.correction == 0);
  CHECK(counts.field == 0);
  CHECK(counts.noop == 10000);
}

TEST_CASE("an isolated error at zero noise is corrected on first selection") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.0);
  // r(4)/kappa = 1, so the error survives only while its site is never
  // selected; the repair-event count is geometric with mean n_sites.
  Rng rng(17, 0);
  double total_events = 0.0;
  constexpr int kRepeats = 2000;
  for (int repeat = 0; repeat < kRepeats; ++repeat) {
    StabilizerConfig config(geo);
    config.flip_site(4);
    int events = 0;
    while (config.flipped_sites() != 0) {
      single_jump(config, rates, rng);
      ++events;
    }
    total_events += events;
  }
  const double mean = total_events / kRepeats;
  const double sigma = std::sqrt((81.0 - 9.0) / kRepeats);  // geometric variance n^2 - n
  CHECK(mean == doctest::Approx(9.0).epsilon(3.0 * sigma / 9.0));
}

TEST_CASE("empirical flip frequency at a k=3 site matches the rate table") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.02);
  StabilizerConfig base(geo);
  base.flip_site(0);
  base.flip_site(1);  // adjacent pair: sites 0 and 1 both see k = 3
  REQUIRE(base.violated_count(1) == 3);

  Rng rng(5, 0);
  constexpr int kTrials = 1000000;
  int flips = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    StabilizerConfig config = base;
    single_jump(config, rates, rng);
    if (config.site_bit(1) != base.site_bit(1)) ++flips;
  }
  // P(flip site 1) = (1/9) * (noise + r(3)) / (kappa + noise)
  const double p = (0.02 + rates.rate(3)) / (9.0 * 1.02);
  const double sigma = std::sqrt(p * (1.0 - p) / kTrials);
  CHECK(static_cast<double>(flips) / kTrials == doctest::Approx(p).epsilon(3.0 * sigma / p));
}

TEST_CASE("per-site event probability mass sums to one") {
  for (auto variant : {RateVariant::DetailedBalance, RateVariant::MajorityRule}) {
    const RateTable table(Model::Ising2D, variant, 1.0, 0.02, 0.01);
    const double total = table.total_site_rate();
    for (int k = 0; k <= 4; ++k) {
      const double mass = table.noise() / total +
                          (table.correction_budget() / total) *
                              (table.rate(k) / table.correction_budget() +
                               (table.correction_budget() - table.rate(k)) /
                                   table.correction_budget()) +
                          table.field_rate() / total;
      CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("global step advances time by dt and touches n_sites events") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.02);
  EngineConfig engine;
  engine.seed = 9;
  engine.t_max = 100.0 / 1.02;
  engine.record_stride = 1;
  const TrajectoryRecord record = run_trajectory(StabilizerConfig(geo), rates, engine, 0);
  REQUIRE(record.times.size() == 101);
  CHECK(record.times.back() == doctest::Approx(100.0 / 1.02));
  CHECK(record.jumps.total() == 100 * 9);
}

TEST_CASE("poisson event counts match the constant-rate mean") {
  Rng rng(31, 0);
  constexpr int kRuns = 10000;
  const double mean = 9.0 * 1.02 * 1.0;
  double total = 0.0;
  for (int run = 0; run < kRuns; ++run) total += static_cast<double>(rng.next_poisson(mean));
  const double sample_mean = total / kRuns;
  const double sigma = std::sqrt(mean / kRuns);
  CHECK(sample_mean == doctest::Approx(9.18).epsilon(3.0 * sigma / 9.18));

  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.02);
  StabilizerConfig config(geo);
  JumpCounts counts;
  evolve_constant_rate(config, rates, rng, 0.0, &counts);
  CHECK(counts.total() == 0);
  CHECK(config.flipped_sites() == 0);
}

TEST_CASE("global-step and constant-rate schemes agree in distribution") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.5);
  EngineConfig engine;
  engine.t_max = 5.0;
  engine.record_stride = 1000000;  // final sample only
  engine.n_trajectories = 4000;

  std::vector<double> global_magnetization, poisson_magnetization;
  engine.scheme = Scheme::GlobalStepChannel;
  engine.seed = 100;
  for (const auto& record : run_ensemble(StabilizerConfig(geo), rates, engine, 2))
    global_magnetization.push_back(record.magnetization.back());
  engine.scheme = Scheme::ConstantRateEvents;
  engine.seed = 200;
  for (const auto& record : run_ensemble(StabilizerConfig(geo), rates, engine, 2))
    poisson_magnetization.push_back(record.magnetization.back());

  CHECK_FALSE(dissipmem::testing::ks_reject_at_001(global_magnetization, poisson_magnetization));
}

TEST_CASE("trajectories are deterministic and thread-count independent") {
  const LatticeGeometry geo = build_geometry(Model::Toric2D, 3);
  const RateTable rates(Model::Toric2D, RateVariant::DetailedBalance, 1.0, 0.05);
  EngineConfig engine;
  engine.seed = 77;
  engine.t_max = 10.0;
  engine.record_stride = 2;
  engine.n_trajectories = 12;

  const auto first = run_ensemble(StabilizerConfig(geo), rates, engine, 1);
  const auto second = run_ensemble(StabilizerConfig(geo), rates, engine, 4);
  REQUIRE(first.size() == second.size());
  for (size_t k = 0; k < first.size(); ++k) {
    CHECK(first[k].times == second[k].times);
    CHECK(first[k].magnetization == second[k].magnetization);
    CHECK(first[k].mean_stabilizer == second[k].mean_stabilizer);
    CHECK(first[k].final_config == second[k].final_config);
    CHECK(first[k].tracker.winding_x == second[k].tracker.winding_x);
    CHECK(first[k].tracker.winding_y == second[k].tracker.winding_y);
  }
  // Re-running a single index reproduces byte-identical series.
  const TrajectoryRecord again = run_trajectory(StabilizerConfig(geo), rates, engine, 5);
  CHECK(again.magnetization == first[5].magnetization);
}

TEST_CASE("ensemble mean at t=0 is exact and stderr shrinks as 1/sqrt(M)") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.5);
  EngineConfig engine;
  engine.seed = 55;
  engine.t_max = 2.0;
  engine.record_stride = 1;

  auto stderr_of_mean = [&](int n_trajectories) {
    engine.n_trajectories = n_trajectories;
    const auto records = run_ensemble(StabilizerConfig(geo), rates, engine, 2);
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& record : records) {
      CHECK(record.magnetization.front() == 1.0);
      const double final_m = record.magnetization.back();
      sum += final_m;
      sum_sq += final_m * final_m;
    }
    const double mean = sum / n_trajectories;
    return std::sqrt((sum_sq / n_trajectories - mean * mean) / n_trajectories);
  };
  const double ratio = stderr_of_mean(100) / stderr_of_mean(1000);
  CHECK(ratio > 2.0);
  CHECK(ratio < 4.8);
}

TEST_CASE("empirical stationary distribution matches the exact generator") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.2);
  const auto pi = stationary_distribution(build_classical_generator(geo, rates));

  StabilizerConfig config(geo);
  Rng rng(123, 0);
  constexpr int64_t kBurnIn = 100000;
  constexpr int64_t kEvents = 2000000;
  for (int64_t i = 0; i < kBurnIn; ++i) single_jump(config, rates, rng);
  std::vector<int64_t> counts(512, 0);
  int state = 0;
  for (int s = 0; s < 9; ++s) state |= config.site_bit(s) ? (1 << s) : 0;
  for (int64_t i = 0; i < kEvents; ++i) {
    const int64_t before = config.flipped_sites();
    single_jump(config, rates, rng);
    if (config.flipped_sites() != before) {
      state = 0;
      for (int s = 0; s < 9; ++s) state |= config.site_bit(s) ? (1 << s) : 0;
    }
    ++counts[state];
  }
  double tv = 0.0;
  for (int c = 0; c < 512; ++c)
    tv += std::abs(static_cast<double>(counts[c]) / kEvents - pi[c]);
  CHECK(tv / 2.0 < 0.02);
}

TEST_CASE("field branch flips only anti-aligned spins") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  // Freeze corrections and noise: only the field can act.
  const RateTable rates(Model::Ising2D, RateVariant::MajorityRule, 1e-9, 0.0, 1.0);
  Rng rng(2, 0);
  StabilizerConfig aligned(geo);
  JumpCounts counts;
  for (int i = 0; i < 2000; ++i) single_jump(aligned, rates, rng, &counts);
  CHECK(aligned.flipped_sites() == 0);
  CHECK(counts.field == 0);

  StabilizerConfig flipped(geo);
  for (int s = 0; s < geo.n_sites; ++s) flipped.flip_site(s);
  for (int i = 0; i < 2000; ++i) single_jump(flipped, rates, rng, &counts);
  CHECK(flipped.flipped_sites() == 0);  // every down spin eventually pushed up
  CHECK(counts.field > 0);
  CHECK(rates.dt() == doctest::Approx(1.0 / (1e-9 + 1.0)));
}

TEST_CASE("checkpoints resume bit-for-bit") {
  const LatticeGeometry geo = build_geometry(Model::Toric2D, 3);
  const RateTable rates(Model::Toric2D, RateVariant::DetailedBalance, 1.0, 0.05);

  Rng rng(42, 7);
  StabilizerConfig config(geo);
  for (int i = 0; i < 137; ++i) single_jump(config, rates, rng);

  Checkpoint checkpoint(config);
  checkpoint.seed = 42;
  checkpoint.traj_index = 7;
  checkpoint.event_count = 137;
  checkpoint.rng_state = rng.state();
  std::stringstream stream;
  write_checkpoint(stream, checkpoint);

  for (int i = 0; i < 211; ++i) single_jump(config, rates, rng);

  Checkpoint resumed = read_checkpoint(stream, geo);
  CHECK(resumed.seed == 42);
  CHECK(resumed.traj_index == 7);
  CHECK(resumed.event_count == 137);
  Rng rng2(0, 0);
  rng2.set_state(resumed.rng_state);
  for (int i = 0; i < 211; ++i) single_jump(resumed.config, rates, rng2);
  CHECK(resumed.config == config);
  CHECK(rng2.state() == rng.state());

  std::stringstream bad("not a checkpoint");
  CHECK_THROWS_AS(read_checkpoint(bad, geo), std::runtime_error);
}

TEST_CASE("toric2d channel rates: edge flips scale with excited endpoints") {
  const LatticeGeometry geo = build_geometry(Model::Toric2D, 3);
  const RateTable rates(Model::Toric2D, RateVariant::DetailedBalance, 1.0, 0.0);
  // One anyon pair: edge 0 has both endpoint stars excited, so conditioned
  // on picking edge 0 the flip probability is r(2)/budget = 1.
  StabilizerConfig base(geo);
  base.flip_site(0);
  REQUIRE(base.sum_syndrome() == 2);
  Rng rng(8, 0);
  constexpr int kTrials = 200000;
  int flips_edge0 = 0;
  for (int trial = 0; trial < kTrials; ++trial) {
    StabilizerConfig config = base;
    single_jump(config, rates, rng);
    if (config.site_bit(0) != base.site_bit(0)) ++flips_edge0;
  }
  const double p = 1.0 / geo.n_sites;  // (1/n) * r(2)/(2 kappa) * 2 kappa/(2 kappa) = 1/n
  const double sigma = std::sqrt(p * (1 - p) / kTrials);
  CHECK(static_cast<double>(flips_edge0) / kTrials == doctest::Approx(p).epsilon(3.0 * sigma / p));
}
