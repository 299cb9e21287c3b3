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

#include "dissipmem/rates.hpp"

using namespace dissipmem;

namespace {

// Independent oracle: solve the detailed-balance condition
// (kt + noise)/noise = e^{4 beta}, beta = (1/8) ln[(kappa+noise)/noise]
// by bisection instead of using the closed form.
double kappa_tilde_by_bisection(double kappa, double noise) {
  const double beta = 0.125 * std::log((kappa + noise) / noise);
  const double target = std::exp(4.0 * beta);
  double lo = 0.0, hi = 10.0 * kappa;
  for (int iteration = 0; iteration < 200; ++iteration) {
    const double mid = 0.5 * (lo + hi);
    ((mid + noise) / noise < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("kappa_tilde matches the detailed-balance root") {
  CHECK(kappa_tilde(1.0, 0.02) == doctest::Approx(0.122828568571).epsilon(1e-9));
  CHECK(kappa_tilde(1.0, 1.0) == doctest::Approx(0.414213562373).epsilon(1e-9));
  CHECK(kappa_tilde(1.0, 0.0) == 0.0);
  for (double noise : {0.001, 0.02, 0.3, 1.0, 2.5})
    for (double kappa : {0.5, 1.0, 3.0})
      CHECK(kappa_tilde(kappa, noise) ==
            doctest::Approx(kappa_tilde_by_bisection(kappa, noise)).epsilon(1e-10));
  CHECK_THROWS_AS(kappa_tilde(1.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(kappa_tilde(-1.0, 0.1), std::invalid_argument);
}

TEST_CASE("inverse temperature per model") {
  CHECK(inverse_temperature(Model::Toric2D, 1.0, 0.01) ==
        doctest::Approx(1.325826227).epsilon(1e-9));
  CHECK(inverse_temperature(Model::Ising2D, 1.0, 0.02) ==
        doctest::Approx(0.4914782041).epsilon(1e-9));
  CHECK(inverse_temperature(Model::Toric4D, 1.0, 0.0006) ==
        doctest::Approx(0.9273975904).epsilon(1e-9));
  CHECK_THROWS_AS(inverse_temperature(Model::Ising2D, 1.0, 0.0), std::invalid_argument);
  // Monotone decreasing in noise at fixed kappa.
  double previous = inverse_temperature(Model::Ising2D, 1.0, 0.001);
  for (double noise : {0.01, 0.1, 1.0}) {
    const double beta = inverse_temperature(Model::Ising2D, 1.0, noise);
    CHECK(beta < previous);
    previous = beta;
  }
}

TEST_CASE("critical noise rate of the Ising map") {
  CHECK(critical_noise_ising(1.0) == doctest::Approx(0.0305022856).epsilon(1e-8));
  CHECK(critical_noise_ising(2.0) == doctest::Approx(2.0 * 0.0305022856).epsilon(1e-8));
  CHECK(inverse_temperature(Model::Ising2D, 1.0, critical_noise_ising(1.0)) ==
        doctest::Approx(0.44).epsilon(1e-6));
  CHECK(inverse_temperature(Model::Ising2D, 1.0, 0.0305) ==
        doctest::Approx(0.44).epsilon(0.001 / 0.44));
}

TEST_CASE("rate table values and detailed-balance ratios") {
  const RateTable table(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.02);
  CHECK(table.rate(0) == 0.0);
  CHECK(table.rate(1) == 0.0);
  CHECK(table.rate(2) == 1.0);
  CHECK(table.rate(3) == doctest::Approx(0.122828568571));
  CHECK(table.rate(4) == 1.0);
  CHECK(table.total_site_rate() == doctest::Approx(1.02));
  CHECK(table.dt() == doctest::Approx(1.0 / 1.02));

  CHECK(table.detailed_balance_ratio(0, 4) == doctest::Approx(0.02 / 1.02).epsilon(1e-12));
  CHECK(table.detailed_balance_ratio(2, 2) == doctest::Approx(1.0));
  // (3,1) pairs with dE = 2(z-2k) = -4: the ratio is e^{+4 beta}, checked
  // against the bisection oracle for kappa_tilde.
  const double kt = kappa_tilde_by_bisection(1.0, 0.02);
  CHECK(table.detailed_balance_ratio(3, 1) ==
        doctest::Approx((kt + 0.02) / 0.02).epsilon(1e-10));
  CHECK_THROWS_AS(table.detailed_balance_ratio(3, 2), std::invalid_argument);
  CHECK_THROWS_AS(table.detailed_balance_ratio(5, -1), std::invalid_argument);
}

TEST_CASE("detailed balance holds for every count and parameter choice") {
  for (double kappa : {0.5, 1.0, 2.0})
    for (double noise : {0.005, 0.02, 0.3, 0.9}) {
      const RateTable table(Model::Ising2D, RateVariant::DetailedBalance, kappa, noise);
      const double beta = table.beta();
      for (int k = 0; k <= 4; ++k) {
        const double expected = std::exp(-2.0 * beta * (4 - 2 * k));
        CHECK(table.detailed_balance_ratio(k, 4 - k) ==
              doctest::Approx(expected).epsilon(1e-12));
      }
      const RateTable toric(Model::Toric2D, RateVariant::DetailedBalance, kappa, noise);
      const double beta_toric = toric.beta();
      for (int k = 0; k <= 2; ++k) {
        const double expected = std::exp(-2.0 * beta_toric * (2 - 2 * k));
        CHECK(toric.detailed_balance_ratio(k, 2 - k) ==
              doctest::Approx(expected).epsilon(1e-12));
      }
    }
}

TEST_CASE("majority rule corrects faster than detailed balance") {
  for (double noise = 0.01; noise < 1.0; noise += 0.07) {
    const RateTable db(Model::Ising2D, RateVariant::DetailedBalance, 1.0, noise);
    const RateTable mr(Model::Ising2D, RateVariant::MajorityRule, 1.0, noise);
    CHECK(mr.detailed_balance_ratio(3, 1) > db.detailed_balance_ratio(3, 1));
    CHECK(mr.rate(3) == 1.0);
  }
}

TEST_CASE("rate monotonicity") {
  // Majority rule: non-decreasing in k throughout.
  const RateTable mr(Model::Ising2D, RateVariant::MajorityRule, 1.0, 0.1);
  for (int k = 1; k <= 4; ++k) CHECK(mr.rate(k) >= mr.rate(k - 1));
  // Detailed balance: rates vanish below k = z/2 and kappa_tilde stays
  // below kappa (the k=3 move is slower than the neutral k=2 move; that is
  // what the stationarity condition demands given r(1) = 0).
  const RateTable db(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.1);
  CHECK(db.rate(0) == 0.0);
  CHECK(db.rate(1) == 0.0);
  CHECK(db.rate(2) == db.kappa());
  CHECK(db.rate(3) <= db.kappa());
  CHECK(db.rate(3) > 0.0);
  CHECK(db.rate(4) == db.kappa());
}

TEST_CASE("toric2d table: rate kappa per excited endpoint star") {
  const RateTable table(Model::Toric2D, RateVariant::DetailedBalance, 1.0, 0.01);
  CHECK(table.rate(0) == 0.0);
  CHECK(table.rate(1) == 1.0);
  CHECK(table.rate(2) == 2.0);
  CHECK(table.correction_budget() == 2.0);
  CHECK(table.total_site_rate() == doctest::Approx(2.01));
  CHECK(table.detailed_balance_ratio(0, 2) == doctest::Approx(0.01 / 2.01).epsilon(1e-12));
}

TEST_CASE("ring table for the exact small-system checks") {
  const RateTable ring = RateTable::ring1d(RateVariant::DetailedBalance, 1.0, 0.1);
  CHECK(ring.z() == 2);
  CHECK(ring.rate(0) == 0.0);
  CHECK(ring.rate(1) == 1.0);
  CHECK(ring.rate(2) == 1.0);
  CHECK(ring.beta() == doctest::Approx(0.25 * std::log(1.1 / 0.1)).epsilon(1e-12));
  CHECK(ring.detailed_balance_ratio(2, 0) ==
        doctest::Approx(std::exp(4.0 * ring.beta())).epsilon(1e-12));
}

TEST_CASE("construction rejects invalid parameters") {
  CHECK_THROWS_AS(RateTable(Model::Ising2D, RateVariant::DetailedBalance, -1.0, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(RateTable(Model::Ising2D, RateVariant::DetailedBalance, 1.0, -0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(RateTable(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.1, -0.5),
                  std::invalid_argument);
  CHECK_THROWS_AS(RateTable(Model::Toric2D, RateVariant::DetailedBalance, 1.0, 0.1, 0.5),
                  std::invalid_argument);
  CHECK_NOTHROW(RateTable(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.1, 0.5));
}
