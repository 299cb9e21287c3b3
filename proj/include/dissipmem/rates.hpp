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

#ifndef DISSIPMEM_RATES_HPP
#define DISSIPMEM_RATES_HPP

#include <array>
#include <string>

#include "dissipmem/lattice.hpp"

namespace dissipmem {

enum class RateVariant { DetailedBalance, MajorityRule };

std::string variant_name(RateVariant variant);

/// Correction rate for a site with z-1 violated adjacent stabilizers such
/// that the combined correction+noise rates satisfy detailed balance.
/// Zero noise gives zero (the corresponding moves freeze).
double kappa_tilde(double kappa, double noise);

/// Inverse temperature of the stationary Gibbs state, in stabilizer
/// coupling units. Ising2D/Toric4D: (1/8)ln[(k+D)/D]; Toric2D:
/// (1/4)ln[(2k+D)/D]. Throws for noise = 0 (beta would be infinite).
double inverse_temperature(Model model, double kappa, double noise);

/// Noise rate at which the Ising thermal map hits beta_c ~ 0.44.
double critical_noise_ising(double kappa);

/// Flip-rate table as a function of the local violated-stabilizer count k,
/// plus the uniform noise rate and optional symmetry-breaking field rate
/// (Ising only). Immutable after construction.
///
/// z=4 (Ising2D, Toric4D): r = {0, 0, kappa, kappa_tilde, kappa} with
/// kappa_tilde = kappa for the majority-rule variant. Toric2D: an edge
/// flips at rate kappa per excited endpoint star, r = {0, kappa, 2 kappa}.
class RateTable {
 public:
  RateTable(Model model, RateVariant variant, double kappa, double noise,
            double field_rate = 0.0);

  /// z=2 table for a 1D Ising ring, used only by the exact small-system
  /// checks. Not a model from the dissipative-memory family proper; the
  /// neutral move (k=1) runs at rate kappa.
  static RateTable ring1d(RateVariant variant, double kappa, double noise);

  double rate(int violated) const { return flip_rate_[violated]; }
  int z() const { return z_; }
  Model model() const { return model_; }
  RateVariant variant() const { return variant_; }
  double kappa() const { return kappa_; }
  double noise() const { return noise_; }
  double field_rate() const { return field_rate_; }

  /// Uniform per-site correction budget: the k-independent rate the
  /// single-jump channel allocates per site, of which the fraction
  /// rate(k)/correction_budget() is an actual flip and the rest a
  /// do-nothing jump. kappa for z=4 and the ring, 2*kappa for Toric2D.
  double correction_budget() const { return correction_budget_; }

  /// Total per-site event rate: correction budget + noise (+ field).
  double total_site_rate() const { return correction_budget_ + noise_ + field_rate_; }

  /// Duration of one global update step (one event per site on average).
  double dt() const { return 1.0 / total_site_rate(); }

  /// [r(k_before)+noise] / [r(k_after)+noise] for a flip toggling all z
  /// adjacent stabilizers (requires k_after = z - k_before). Equals
  /// e^{-beta dE}, dE = 2(z - 2 k_before), for the detailed-balance table.
  double detailed_balance_ratio(int k_before, int k_after) const;

  double beta() const;

 private:
  RateTable() = default;

  bool ring_ = false;
  Model model_ = Model::Ising2D;
  RateVariant variant_ = RateVariant::DetailedBalance;
  double kappa_ = 0.0;
  double noise_ = 0.0;
  double field_rate_ = 0.0;
  double correction_budget_ = 0.0;
  int z_ = 0;
  std::array<double, 5> flip_rate_{};
};

}  // namespace dissipmem

#endif  // DISSIPMEM_RATES_HPP
