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

#include <set>
#include <sstream>

#include "dissipmem/lattice.hpp"
#include "dissipmem/rng.hpp"
#include "oracles.hpp"

using namespace dissipmem;
using dissipmem::testing::brute_force_homology;
using dissipmem::testing::recompute_syndrome;
using dissipmem::testing::recompute_violated_count;

namespace {

void check_incidence_consistency(const LatticeGeometry& geo) {
  for (int s = 0; s < geo.n_sites; ++s) {
    std::set<int> seen;
    for (int32_t t : geo.stabs_of_site(s)) {
      CHECK(t >= 0);
      CHECK(t < geo.n_stabilizers);
      CHECK(seen.insert(t).second);  // no duplicate stabilizers per site
      const auto sites = geo.sites_of_stab(t);
      CHECK(std::count(sites.begin(), sites.end(), s) == 1);
    }
  }
  for (int t = 0; t < geo.n_stabilizers; ++t)
    for (int32_t s : geo.sites_of_stab(t)) {
      const auto stabs = geo.stabs_of_site(s);
      CHECK(std::count(stabs.begin(), stabs.end(), t) == 1);
    }
}

}  // namespace

TEST_CASE("geometry counts and coordination") {
  const LatticeGeometry ising = build_geometry(Model::Ising2D, 3);
  CHECK(ising.n_sites == 9);
  CHECK(ising.n_stabilizers == 18);
  CHECK(ising.stabs_per_site == 4);
  CHECK(ising.sites_per_stab == 2);

  const LatticeGeometry toric = build_geometry(Model::Toric2D, 4);
  CHECK(toric.n_sites == 32);
  CHECK(toric.n_stabilizers == 16);
  CHECK(toric.stabs_per_site == 2);
  CHECK(toric.sites_per_stab == 4);

  const LatticeGeometry big = build_geometry(Model::Toric4D, 5);
  CHECK(big.n_sites == 3750);
  CHECK(big.n_stabilizers == 2500);
  CHECK(big.stabs_per_site == 4);
  CHECK(big.sites_per_stab == 6);
}

TEST_CASE("geometry incidence tables are mutually consistent") {
  check_incidence_consistency(build_geometry(Model::Ising2D, 3));
  check_incidence_consistency(build_geometry(Model::Ising2D, 5));
  check_incidence_consistency(build_geometry(Model::Toric2D, 2));
  check_incidence_consistency(build_geometry(Model::Toric2D, 4));
  check_incidence_consistency(build_geometry(Model::Toric4D, 2));
  check_incidence_consistency(build_geometry(Model::Toric4D, 3));
}

TEST_CASE("every toric star lists each of its edges exactly once") {
  const LatticeGeometry geo = build_geometry(Model::Toric2D, 4);
  for (int star = 0; star < geo.n_stabilizers; ++star)
    for (int32_t edge : geo.sites_of_stab(star)) {
      const auto stars = geo.stabs_of_site(edge);
      CHECK(stars.size() == 2);
      CHECK(std::count(stars.begin(), stars.end(), star) == 1);
    }
}

TEST_CASE("size minimums are enforced") {
  CHECK_THROWS_AS(build_geometry(Model::Ising2D, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_geometry(Model::Toric2D, 1), std::invalid_argument);
  CHECK_THROWS_AS(build_geometry(Model::Toric4D, 1), std::invalid_argument);
  CHECK_NOTHROW(build_geometry(Model::Ising2D, 3));
  CHECK_NOTHROW(build_geometry(Model::Toric2D, 2));
}

TEST_CASE("single flip violates all adjacent stabilizers") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  StabilizerConfig config(geo);
  config.flip_site(0);
  CHECK(config.violated_count(0) == 4);
  int neighbors_with_one = 0;
  for (int s = 1; s < geo.n_sites; ++s) {
    CHECK(config.violated_count(s) == recompute_violated_count(config, s));
    if (config.violated_count(s) == 1) ++neighbors_with_one;
  }
  CHECK(neighbors_with_one == 4);
  CHECK(config.sum_syndrome() == 4);
}

TEST_CASE("flip_site is an involution and distinct flips commute") {
  const LatticeGeometry geo = build_geometry(Model::Toric2D, 3);
  StabilizerConfig config(geo);
  const StabilizerConfig original = config;
  config.flip_site(5);
  config.flip_site(5);
  CHECK(config == original);
  CHECK(config.sum_syndrome() == 0);

  StabilizerConfig ab = config, ba = config;
  ab.flip_site(2);
  ab.flip_site(11);
  ba.flip_site(11);
  ba.flip_site(2);
  CHECK(ab == ba);
  CHECK(ab.sum_syndrome() == ba.sum_syndrome());
}

TEST_CASE("out-of-range site index is rejected") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  StabilizerConfig config(geo);
  CHECK_THROWS_AS(config.flip_site(9), std::out_of_range);
  CHECK_THROWS_AS(config.flip_site(-1), std::out_of_range);
}

TEST_CASE("incremental syndrome equals from-scratch recomputation") {
  Rng rng(11, 0);
  for (Model model : {Model::Ising2D, Model::Toric2D, Model::Toric4D}) {
    const int n = model == Model::Ising2D ? 4 : 3;
    const LatticeGeometry geo = build_geometry(model, n);
    StabilizerConfig config(geo);
    for (int step = 0; step < 2000; ++step)
      config.flip_site(static_cast<int>(rng.next_below(geo.n_sites)));
    const auto reference = recompute_syndrome(config);
    int64_t total = 0;
    for (int t = 0; t < geo.n_stabilizers; ++t) {
      CHECK(config.syndrome_bit(t) == (reference[t] != 0));
      total += reference[t];
    }
    CHECK(config.sum_syndrome() == total);
    for (int s = 0; s < geo.n_sites; ++s)
      CHECK(config.violated_count(s) == recompute_violated_count(config, s));
  }
}

TEST_CASE("observables at reference and under global flip") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  StabilizerConfig config(geo);
  CHECK(config.observables().magnetization == doctest::Approx(1.0));
  CHECK(config.observables().mean_stabilizer == doctest::Approx(1.0));
  CHECK(config.observables().probe_spin == 1);
  for (int s = 0; s < geo.n_sites; ++s) config.flip_site(s);
  CHECK(config.observables().magnetization == doctest::Approx(-1.0));
  CHECK(config.observables().mean_stabilizer == doctest::Approx(1.0));
  CHECK(config.observables().probe_spin == -1);
}

TEST_CASE("toric4d flip violates 4 edge stabilizers and keeps loops closed") {
  const LatticeGeometry geo = build_geometry(Model::Toric4D, 3);
  StabilizerConfig config(geo);
  config.flip_site(0);
  CHECK(config.sum_syndrome() == 4);
  CHECK(config.violated_count(0) == 4);
  CHECK(config.cycle_check());
  const auto reference = recompute_syndrome(config);
  for (int t = 0; t < geo.n_stabilizers; ++t)
    CHECK(config.syndrome_bit(t) == (reference[t] != 0));
  CHECK(config.observables().mean_stabilizer == doctest::Approx((324.0 - 8.0) / 324.0));
}

TEST_CASE("cycle constraint holds along random flip sequences") {
  Rng rng(7, 1);
  const LatticeGeometry geo = build_geometry(Model::Toric4D, 3);
  StabilizerConfig config(geo);
  constexpr int kFlips = 1000000;
  for (int step = 1; step <= kFlips; ++step) {
    config.flip_site(static_cast<int>(rng.next_below(geo.n_sites)));
    if (step % 997 == 0) CHECK(config.cycle_check());
  }
  CHECK(config.cycle_check());

  const LatticeGeometry toric = build_geometry(Model::Toric2D, 4);
  StabilizerConfig config2d(toric);
  for (int step = 0; step < 5000; ++step)
    config2d.flip_site(static_cast<int>(rng.next_below(toric.n_sites)));
  CHECK(config2d.cycle_check());
}

TEST_CASE("hand-injected odd syndrome fails the closure check") {
  const LatticeGeometry geo = build_geometry(Model::Toric2D, 3);
  std::vector<uint8_t> syndrome(geo.n_stabilizers, 0);
  syndrome[4] = 1;  // a single violated star cannot come from any flip chain
  CHECK_FALSE(syndrome_closure_ok(geo, syndrome));
  syndrome[7] = 1;
  CHECK(syndrome_closure_ok(geo, syndrome));

  const LatticeGeometry geo4 = build_geometry(Model::Toric4D, 2);
  std::vector<uint8_t> open_string(geo4.n_stabilizers, 0);
  open_string[0] = 1;  // a lone violated edge is an open domain wall
  CHECK_FALSE(syndrome_closure_ok(geo4, open_string));
}

TEST_CASE("cycle_check rejects the Ising model") {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
  StabilizerConfig config(geo);
  CHECK_THROWS_AS(config.cycle_check(), std::invalid_argument);
}

TEST_CASE("homology tracker matches brute-force cycle classification") {
  for (int n : {3, 4, 5}) {
    const LatticeGeometry geo = build_geometry(Model::Toric2D, n);
    Rng rng(1234 + n, 0);

    // Random closed walks on the star lattice produce cycles of random
    // homology class; the incremental parities must match the scan.
    for (int trial = 0; trial < 50; ++trial) {
      StabilizerConfig config(geo);
      HomologyTracker tracker;
      int x = static_cast<int>(rng.next_below(n));
      int y = static_cast<int>(rng.next_below(n));
      const int x0 = x, y0 = y;
      const int length = 8 + static_cast<int>(rng.next_below(40));
      auto step = [&](int direction) {
        switch (direction) {
          case 0:  // +x
            config.flip_site(geo.edge_index(x, y, 0));
            tracker.on_flip(geo, geo.edge_index(x, y, 0));
            x = (x + 1) % n;
            break;
          case 1:  // -x
            x = (x + n - 1) % n;
            config.flip_site(geo.edge_index(x, y, 0));
            tracker.on_flip(geo, geo.edge_index(x, y, 0));
            break;
          case 2:  // +y
            config.flip_site(geo.edge_index(x, y, 1));
            tracker.on_flip(geo, geo.edge_index(x, y, 1));
            y = (y + 1) % n;
            break;
          default:  // -y
            y = (y + n - 1) % n;
            config.flip_site(geo.edge_index(x, y, 1));
            tracker.on_flip(geo, geo.edge_index(x, y, 1));
            break;
        }
      };
      for (int moves = 0; moves < length; ++moves)
        step(static_cast<int>(rng.next_below(4)));
      while (x != x0) step(0);  // close the walk
      while (y != y0) step(2);
      REQUIRE(config.sum_syndrome() == 0);

      const auto reference = brute_force_homology(geo, config.site_bits());
      CHECK(static_cast<int>(tracker.winding_x) == reference.winding_x);
      CHECK(static_cast<int>(tracker.winding_y) == reference.winding_y);
    }

    // Straight non-contractible loops carry definite winding.
    StabilizerConfig config(geo);
    HomologyTracker tracker;
    for (int x = 0; x < n; ++x) {
      config.flip_site(geo.edge_index(x, 1, 0));
      tracker.on_flip(geo, geo.edge_index(x, 1, 0));
    }
    const auto reference = brute_force_homology(geo, config.site_bits());
    CHECK(reference.winding_x == 1);
    CHECK(reference.winding_y == 0);
    CHECK(static_cast<int>(tracker.winding_x) == 1);
    CHECK(static_cast<int>(tracker.winding_y) == 0);
  }
}

TEST_CASE("config serialization round-trips and validates headers") {
  const LatticeGeometry geo = build_geometry(Model::Toric2D, 3);
  StabilizerConfig config(geo);
  Rng rng(2, 0);
  for (int step = 0; step < 100; ++step)
    config.flip_site(static_cast<int>(rng.next_below(geo.n_sites)));

  std::stringstream stream;
  config.write(stream);
  const StabilizerConfig loaded = StabilizerConfig::read(stream, geo);
  CHECK(loaded == config);
  CHECK(loaded.sum_syndrome() == config.sum_syndrome());

  std::stringstream truncated(stream.str().substr(0, 8));
  CHECK_THROWS_AS(StabilizerConfig::read(truncated, geo), std::runtime_error);

  const LatticeGeometry other = build_geometry(Model::Toric2D, 4);
  std::stringstream mismatched;
  config.write(mismatched);
  CHECK_THROWS_AS(StabilizerConfig::read(mismatched, other), std::runtime_error);
}
