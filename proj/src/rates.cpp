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

#include "dissipmem/rates.hpp"

#include <cmath>
#include <stdexcept>

namespace dissipmem {

std::string variant_name(RateVariant variant) {
  return variant == RateVariant::DetailedBalance ? "detailed-balance" : "majority-rule";
}

double kappa_tilde(double kappa, double noise) {
  if (kappa <= 0.0) throw std::invalid_argument("kappa_tilde: kappa must be positive");
  if (noise < 0.0) throw std::invalid_argument("kappa_tilde: noise must be non-negative");
  return std::sqrt(noise * kappa + noise * noise) - noise;
}

double inverse_temperature(Model model, double kappa, double noise) {
  if (kappa <= 0.0) throw std::invalid_argument("inverse_temperature: kappa must be positive");
  if (noise <= 0.0)
    throw std::invalid_argument(
        "inverse_temperature: noise = 0 means infinite beta; callers must special-case");
  switch (model) {
    case Model::Ising2D:
    case Model::Toric4D:
      return 0.125 * std::log((kappa + noise) / noise);
    case Model::Toric2D:
      return 0.25 * std::log((2.0 * kappa + noise) / noise);
  }
  throw std::invalid_argument("unknown model tag");
}

double critical_noise_ising(double kappa) {
  if (kappa <= 0.0) throw std::invalid_argument("critical_noise_ising: kappa must be positive");
  constexpr double kBetaC = 0.44;
  return kappa / (std::exp(8.0 * kBetaC) - 1.0);
}

RateTable::RateTable(Model model, RateVariant variant, double kappa, double noise,
                     double field_rate)
    : model_(model), variant_(variant), kappa_(kappa), noise_(noise), field_rate_(field_rate) {
  if (kappa <= 0.0) throw std::invalid_argument("rate table: kappa must be positive");
  if (noise < 0.0) throw std::invalid_argument("rate table: noise must be non-negative");
  if (field_rate < 0.0) throw std::invalid_argument("rate table: field rate must be non-negative");
  if (field_rate > 0.0 && model != Model::Ising2D)
    throw std::invalid_argument("rate table: field perturbation is Ising-only");

  switch (model) {
    case Model::Ising2D:
    case Model::Toric4D: {
      z_ = 4;
      correction_budget_ = kappa;
      const double kt =
          variant == RateVariant::MajorityRule ? kappa : kappa_tilde(kappa, noise);
      flip_rate_ = {0.0, 0.0, kappa, kt, kappa};
      if (noise <= kappa && kt > kappa + 1e-12)
        throw std::logic_error("rate table: kappa_tilde exceeds kappa");
      break;
    }
    case Model::Toric2D: {
      // One jump per excited endpoint star per leg, each at rate kappa.
      z_ = 2;
      correction_budget_ = 2.0 * kappa;
      flip_rate_ = {0.0, kappa, 2.0 * kappa, 0.0, 0.0};
      break;
    }
  }
}

RateTable RateTable::ring1d(RateVariant variant, double kappa, double noise) {
  if (kappa <= 0.0) throw std::invalid_argument("rate table: kappa must be positive");
  if (noise < 0.0) throw std::invalid_argument("rate table: noise must be non-negative");
  RateTable table;
  table.model_ = Model::Ising2D;  // nearest family member; beta uses the ring formula
  table.ring_ = true;
  table.variant_ = variant;
  table.kappa_ = kappa;
  table.noise_ = noise;
  table.z_ = 2;
  table.correction_budget_ = kappa;
  table.flip_rate_ = {0.0, kappa, kappa, 0.0, 0.0};
  return table;
}

double RateTable::detailed_balance_ratio(int k_before, int k_after) const {
  if (k_before < 0 || k_before > z_ || k_after < 0 || k_after > z_)
    throw std::invalid_argument("detailed_balance_ratio: count out of range");
  if (k_after != z_ - k_before)
    throw std::invalid_argument(
        "detailed_balance_ratio: a flip toggles all adjacent stabilizers, so k_after must be "
        "z - k_before");
  return (flip_rate_[k_before] + noise_) / (flip_rate_[k_after] + noise_);
}

double RateTable::beta() const {
  if (ring_) {
    if (noise_ <= 0.0)
      throw std::invalid_argument(
          "inverse_temperature: noise = 0 means infinite beta; callers must special-case");
    return 0.25 * std::log((kappa_ + noise_) / noise_);
  }
  return inverse_temperature(model_, kappa_, noise_);
}

}  // namespace dissipmem
