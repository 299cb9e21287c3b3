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

#ifndef DISSIPMEM_ANALYSIS_HPP
#define DISSIPMEM_ANALYSIS_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dissipmem/engine.hpp"

namespace dissipmem {

struct AutocorrEstimate {
  std::vector<double> lags;  // in units of dt (lag index * sample stride)
  std::vector<double> chi;
  double variance_at_zero = 0.0;
  int64_t n_samples = 0;
};

/// Lag-product autocorrelation with per-series mean subtraction,
/// chi[l] = (1/(T-l)) sum_t (m_t - mbar)(m_{t+l} - mbar). Requires
/// max_lag < length/10 (the estimator variance is unbounded otherwise).
/// lag_unit converts lag indices to dt units (= the sample stride).
AutocorrEstimate autocorrelation(std::span<const double> series, int max_lag, double lag_unit);

/// Averages per-trajectory estimates (all on the same lag grid).
AutocorrEstimate average_autocorr(const std::vector<AutocorrEstimate>& estimates);

struct ExpFit {
  // chi(t) ~ sum_i amplitudes[i] * exp(-rates[i] * t), rates ascending.
  std::vector<double> amplitudes;
  std::vector<double> rates;  // units 1/dt
  double residual = 0.0;      // rms misfit over the window
  int window_begin = 0;       // lag indices, inclusive/exclusive
  int window_end = 0;
  bool degenerate = false;    // double fit collapsed to a single exponential

  double tau() const { return 1.0 / rates.front(); }
};

struct FitWindow {
  int begin = 1;
  int end = 0;  // exclusive lag index
};

/// Default rule: lags from 1 up to the first lag where chi drops below 5%
/// of chi[0] or becomes non-positive.
FitWindow default_fit_window(const AutocorrEstimate& estimate);

/// Least squares on ln chi over the window. Throws if the window has
/// fewer than 2 positive lags (diagnostic suggests shrinking the window).
ExpFit fit_single_exp(const AutocorrEstimate& estimate, FitWindow window);

/// Damped Gauss-Newton fit of c1 e^{-g1 t} + c2 e^{-g2 t} (g1 <= g2) with
/// positivity kept by log-parameterization. Initial guesses come from the
/// late- and early-window slopes. Falls back to the single-exponential
/// solution (degenerate flag) whenever that fits no worse, so the double
/// fit residual never exceeds the single fit residual.
ExpFit fit_double_exp(const AutocorrEstimate& estimate, FitWindow window);

struct ScanPoint {
  double noise = 0.0;
  double tau = 0.0;
  double tau_err = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double residual = 0.0;
  int64_t n_samples = 0;
  bool fit_ok = false;
  std::string message;
  std::vector<double> traj_variance;  // per-trajectory chi[0], diagnostic
};

struct ScanResult {
  std::vector<ScanPoint> points;       // sorted by noise rate
  std::optional<double> peak_noise;    // argmax tau with parabolic refinement
};

struct ScanSettings {
  Model model = Model::Ising2D;
  RateVariant variant = RateVariant::DetailedBalance;
  double kappa = 1.0;
  int linear_size = 20;
  int n_threads = 1;
  int bootstrap_resamples = 100;
};

/// Steady-state autocorrelation time vs noise rate. Per grid point: an
/// ensemble started from the reference state, burn-in, per-trajectory
/// autocorrelation of the designated observable (Ising: probe spin;
/// Toric4D: mean stabilizer), single- and double-exponential fits, and
/// trajectory-bootstrap error bars. Fit failures are recorded and the scan
/// continues. The peak estimate interpolates ln tau parabolically over ln
/// noise around the grid maximum.
ScanResult critical_scan(const ScanSettings& settings, std::span<const double> noise_grid,
                         const EngineConfig& engine_config, int max_lag);

struct ScalingFit {
  double c = 0.0;        // overlap deviation decays as e^{-cN}
  double ci_low = 0.0;   // 95% confidence interval on c
  double ci_high = 0.0;
};

/// Weighted linear fit of ln(1 - overlap) against N; returns the decay
/// constant c = -slope. Any overlap exactly 1 is a resolution floor and is
/// rejected (more trajectories needed). stderrs may be empty (unweighted).
ScalingFit overlap_scaling_fit(std::span<const double> sizes, std::span<const double> overlaps,
                               std::span<const double> stderrs);

/// First time after which |series - m_ss| < epsilon holds for 10
/// consecutive samples, with m_ss estimated from the series tail (last
/// 10%). Empty optional = censored (never converged within the series).
std::optional<double> equilibration_time(std::span<const double> times,
                                         std::span<const double> series, double epsilon);

}  // namespace dissipmem

#endif  // DISSIPMEM_ANALYSIS_HPP
