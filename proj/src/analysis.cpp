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

#include "dissipmem/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace dissipmem {

namespace {

double mean_of(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

// Order-independent per-point seed derivation (FNV-1a over the noise bits).
uint64_t mix_seed(uint64_t seed, double noise) {
  uint64_t bits;
  static_assert(sizeof(bits) == sizeof(noise));
  std::memcpy(&bits, &noise, sizeof(bits));
  uint64_t h = 1469598103934665603ULL ^ seed;
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffULL;
    h *= 1099511628211ULL;
  }
  return h;
}

double rms_residual(const AutocorrEstimate& estimate, FitWindow window, const ExpFit& fit) {
  double sum = 0.0;
  for (int l = window.begin; l < window.end; ++l) {
    double model = 0.0;
    for (size_t i = 0; i < fit.rates.size(); ++i)
      model += fit.amplitudes[i] * std::exp(-fit.rates[i] * estimate.lags[l]);
    const double r = model - estimate.chi[l];
    sum += r * r;
  }
  return std::sqrt(sum / std::max(1, window.end - window.begin));
}

// ln-linear least squares over [begin, end); requires positive chi there.
std::pair<double, double> log_linear_fit(const AutocorrEstimate& estimate, int begin, int end) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = end - begin;
  for (int l = begin; l < end; ++l) {
    const double x = estimate.lags[l];
    const double y = std::log(estimate.chi[l]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  const double slope = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - slope * sx) / n;
  return {std::exp(intercept), -slope};  // amplitude, decay rate
}

struct DoubleExpParams {
  std::array<double, 4> log_params;  // ln c1, ln g1, ln c2, ln g2
};

double double_exp_rss(const AutocorrEstimate& estimate, FitWindow window,
                      const DoubleExpParams& p) {
  const double c1 = std::exp(p.log_params[0]), g1 = std::exp(p.log_params[1]);
  const double c2 = std::exp(p.log_params[2]), g2 = std::exp(p.log_params[3]);
  double rss = 0.0;
  for (int l = window.begin; l < window.end; ++l) {
    const double t = estimate.lags[l];
    const double r = c1 * std::exp(-g1 * t) + c2 * std::exp(-g2 * t) - estimate.chi[l];
    rss += r * r;
  }
  return rss;
}

// Levenberg-Marquardt with Marquardt diagonal scaling on log-parameters.
DoubleExpParams refine_double_exp(const AutocorrEstimate& estimate, FitWindow window,
                                  DoubleExpParams p, int max_iterations = 200) {
  using Vec4 = Eigen::Vector4d;
  using Mat4 = Eigen::Matrix4d;
  double lambda = 1e-3;
  double rss = double_exp_rss(estimate, window, p);
  for (int iteration = 0; iteration < max_iterations; ++iteration) {
    const double c1 = std::exp(p.log_params[0]), g1 = std::exp(p.log_params[1]);
    const double c2 = std::exp(p.log_params[2]), g2 = std::exp(p.log_params[3]);
    Mat4 jtj = Mat4::Zero();
    Vec4 jtr = Vec4::Zero();
    for (int l = window.begin; l < window.end; ++l) {
      const double t = estimate.lags[l];
      const double e1 = c1 * std::exp(-g1 * t);
      const double e2 = c2 * std::exp(-g2 * t);
      const double r = e1 + e2 - estimate.chi[l];
      const Vec4 grad(e1, -e1 * g1 * t, e2, -e2 * g2 * t);
      jtj += grad * grad.transpose();
      jtr += grad * r;
    }
    Mat4 damped = jtj;
    for (int i = 0; i < 4; ++i) damped(i, i) += lambda * std::max(jtj(i, i), 1e-300);
    const Vec4 step = damped.ldlt().solve(-jtr);
    DoubleExpParams candidate = p;
    for (int i = 0; i < 4; ++i)
      candidate.log_params[i] = std::clamp(p.log_params[i] + step[i], -700.0, 700.0);
    const double candidate_rss = double_exp_rss(estimate, window, candidate);
    if (candidate_rss < rss) {
      const bool converged = rss - candidate_rss < 1e-14 * (1.0 + rss);
      p = candidate;
      rss = candidate_rss;
      lambda = std::max(lambda / 3.0, 1e-12);
      if (converged) break;
    } else {
      lambda *= 10.0;
      if (lambda > 1e12) break;
    }
  }
  return p;
}

}  // namespace

AutocorrEstimate autocorrelation(std::span<const double> series, int max_lag, double lag_unit) {
  const int length = static_cast<int>(series.size());
  if (max_lag < 0) throw std::invalid_argument("autocorrelation: negative max_lag");
  if (length < 10 * std::max(1, max_lag))
    throw std::invalid_argument(
        "autocorrelation: series shorter than 10*max_lag (estimator variance unbounded)");
  const double mean = mean_of(series);
  AutocorrEstimate estimate;
  estimate.n_samples = length;
  estimate.lags.resize(max_lag + 1);
  estimate.chi.resize(max_lag + 1);
  for (int lag = 0; lag <= max_lag; ++lag) {
    double sum = 0.0;
    for (int t = 0; t + lag < length; ++t) sum += (series[t] - mean) * (series[t + lag] - mean);
    estimate.lags[lag] = lag * lag_unit;
    estimate.chi[lag] = sum / (length - lag);
  }
  estimate.variance_at_zero = estimate.chi[0];
  return estimate;
}

AutocorrEstimate average_autocorr(const std::vector<AutocorrEstimate>& estimates) {
  if (estimates.empty()) throw std::invalid_argument("average_autocorr: empty estimate list");
  AutocorrEstimate mean = estimates.front();
  for (size_t k = 1; k < estimates.size(); ++k) {
    if (estimates[k].chi.size() != mean.chi.size())
      throw std::invalid_argument("average_autocorr: mismatched lag grids");
    for (size_t l = 0; l < mean.chi.size(); ++l) mean.chi[l] += estimates[k].chi[l];
    mean.n_samples += estimates[k].n_samples;
  }
  const double scale = 1.0 / static_cast<double>(estimates.size());
  for (double& value : mean.chi) value *= scale;
  mean.variance_at_zero = mean.chi[0];
  return mean;
}

FitWindow default_fit_window(const AutocorrEstimate& estimate) {
  FitWindow window;
  window.begin = 1;
  const double floor = 0.05 * estimate.chi[0];
  int end = 1;
  while (end < static_cast<int>(estimate.chi.size()) && estimate.chi[end] > floor) ++end;
  window.end = end;
  return window;
}

ExpFit fit_single_exp(const AutocorrEstimate& estimate, FitWindow window) {
  if (window.end > static_cast<int>(estimate.chi.size()))
    throw std::invalid_argument("fit window exceeds available lags");
  for (int l = window.begin; l < window.end; ++l)
    if (!(estimate.chi[l] > 0.0))
      throw std::runtime_error("fit_single_exp: non-positive chi inside window at lag index " +
                               std::to_string(l) + "; shrink the window");
  if (window.end - window.begin < 2)
    throw std::runtime_error("fit_single_exp: window has fewer than 2 lags (no decay visible)");
  auto [amplitude, rate] = log_linear_fit(estimate, window.begin, window.end);
  if (!(rate > 0.0)) throw std::runtime_error("fit_single_exp: no positive decay in window");
  ExpFit fit;
  fit.amplitudes = {amplitude};
  fit.rates = {rate};
  fit.window_begin = window.begin;
  fit.window_end = window.end;
  fit.residual = rms_residual(estimate, window, fit);
  return fit;
}

ExpFit fit_double_exp(const AutocorrEstimate& estimate, FitWindow window) {
  const ExpFit single = fit_single_exp(estimate, window);
  ExpFit collapsed;
  collapsed.amplitudes = {single.amplitudes[0], 0.0};
  collapsed.rates = {single.rates[0], single.rates[0]};
  collapsed.residual = single.residual;
  collapsed.window_begin = window.begin;
  collapsed.window_end = window.end;
  collapsed.degenerate = true;

  const int span = window.end - window.begin;
  if (span < 4) return collapsed;

  // Slow rate from the late half, fast rate from the early third.
  const int mid = window.begin + span / 2;
  const int early_end = window.begin + std::max(2, span / 3);
  double g_slow = single.rates[0], g_fast = single.rates[0];
  if (window.end - mid >= 2) g_slow = log_linear_fit(estimate, mid, window.end).second;
  g_fast = log_linear_fit(estimate, window.begin, early_end).second;
  if (!(g_slow > 0.0)) g_slow = single.rates[0];
  if (!(g_fast > 0.0)) g_fast = single.rates[0];
  if (g_slow > g_fast) std::swap(g_slow, g_fast);
  if (g_fast < 1.2 * g_slow) {
    g_slow = 0.6 * single.rates[0];
    g_fast = 2.0 * single.rates[0];
  }

  // Amplitudes by linear least squares at fixed rates, clamped positive.
  Eigen::MatrixXd design(span, 2);
  Eigen::VectorXd target(span);
  for (int l = window.begin; l < window.end; ++l) {
    design(l - window.begin, 0) = std::exp(-g_slow * estimate.lags[l]);
    design(l - window.begin, 1) = std::exp(-g_fast * estimate.lags[l]);
    target(l - window.begin) = estimate.chi[l];
  }
  Eigen::Vector2d amps = design.colPivHouseholderQr().solve(target);
  const double tiny = 1e-9 * std::max(estimate.chi[0], 1e-300);
  amps[0] = std::max(amps[0], tiny);
  amps[1] = std::max(amps[1], tiny);

  DoubleExpParams params{{std::log(amps[0]), std::log(g_slow), std::log(amps[1]),
                          std::log(g_fast)}};
  params = refine_double_exp(estimate, window, params);

  ExpFit fit;
  fit.amplitudes = {std::exp(params.log_params[0]), std::exp(params.log_params[2])};
  fit.rates = {std::exp(params.log_params[1]), std::exp(params.log_params[3])};
  if (fit.rates[0] > fit.rates[1]) {
    std::swap(fit.rates[0], fit.rates[1]);
    std::swap(fit.amplitudes[0], fit.amplitudes[1]);
  }
  fit.window_begin = window.begin;
  fit.window_end = window.end;
  fit.residual = rms_residual(estimate, window, fit);
  if (fit.residual > collapsed.residual || fit.rates[1] < 1.01 * fit.rates[0]) {
    if (fit.residual > collapsed.residual) return collapsed;
    fit.degenerate = true;
  }
  return fit;
}

ScanResult critical_scan(const ScanSettings& settings, std::span<const double> noise_grid,
                         const EngineConfig& engine_config, int max_lag) {
  if (settings.model == Model::Toric2D)
    throw std::invalid_argument("critical_scan: no autocorrelation protocol for Toric2D");
  const LatticeGeometry geo = build_geometry(settings.model, settings.linear_size);
  const StabilizerConfig reference(geo);

  std::vector<double> grid(noise_grid.begin(), noise_grid.end());
  std::sort(grid.begin(), grid.end());

  ScanResult result;
  for (const double noise : grid) {
    ScanPoint point;
    point.noise = noise;
    try {
      const RateTable rates(settings.model, settings.variant, settings.kappa, noise);
      EngineConfig run = engine_config;
      run.seed = mix_seed(engine_config.seed, noise);

      std::vector<AutocorrEstimate> per_trajectory(run.n_trajectories);
      parallel_for_index(run.n_trajectories, settings.n_threads, [&](int index) {
        const TrajectoryRecord record = run_trajectory(reference, rates, run, index);
        std::vector<double> series;
        series.reserve(record.times.size());
        if (settings.model == Model::Ising2D)
          for (int8_t value : record.probe) series.push_back(value);
        else
          series = record.mean_stabilizer;
        const int lag_cap = std::min<int>(max_lag, (static_cast<int>(series.size()) - 1) / 10);
        per_trajectory[index] =
            autocorrelation(series, lag_cap, static_cast<double>(run.record_stride));
      });
      point.traj_variance.reserve(per_trajectory.size());
      for (const AutocorrEstimate& estimate : per_trajectory)
        point.traj_variance.push_back(estimate.variance_at_zero);
      const AutocorrEstimate mean_chi = average_autocorr(per_trajectory);
      const FitWindow window = default_fit_window(mean_chi);
      const ExpFit single = fit_single_exp(mean_chi, window);
      const ExpFit two = fit_double_exp(mean_chi, window);
      point.tau = single.tau();
      point.gamma1 = two.rates[0];
      point.gamma2 = two.rates[1];
      point.residual = two.residual;
      point.n_samples = mean_chi.n_samples;
      point.fit_ok = true;

      // Trajectory bootstrap (fixed 100 resamples by default).
      if (settings.bootstrap_resamples > 0 && per_trajectory.size() > 1) {
        Rng boot(run.seed, 0x626f6f74ULL);
        std::vector<double> taus;
        taus.reserve(settings.bootstrap_resamples);
        std::vector<AutocorrEstimate> resample(per_trajectory.size());
        for (int b = 0; b < settings.bootstrap_resamples; ++b) {
          for (size_t k = 0; k < per_trajectory.size(); ++k)
            resample[k] =
                per_trajectory[boot.next_below(static_cast<uint32_t>(per_trajectory.size()))];
          try {
            const AutocorrEstimate chi_b = average_autocorr(resample);
            taus.push_back(fit_single_exp(chi_b, default_fit_window(chi_b)).tau());
          } catch (const std::exception&) {
            // skip failed resample
          }
        }
        if (taus.size() > 1) {
          const double mean_tau = mean_of(taus);
          double var = 0.0;
          for (double t : taus) var += (t - mean_tau) * (t - mean_tau);
          point.tau_err = std::sqrt(var / (taus.size() - 1));
        }
      }
    } catch (const std::exception& error) {
      point.fit_ok = false;
      point.message = error.what();
    }
    result.points.push_back(std::move(point));
  }

  // Peak location: grid argmax of tau with parabolic refinement of ln tau
  // over ln noise when the maximum is interior.
  int best = -1;
  for (size_t i = 0; i < result.points.size(); ++i)
    if (result.points[i].fit_ok && (best < 0 || result.points[i].tau > result.points[best].tau))
      best = static_cast<int>(i);
  if (best >= 0) {
    double peak = result.points[best].noise;
    if (best > 0 && best + 1 < static_cast<int>(result.points.size()) &&
        result.points[best - 1].fit_ok && result.points[best + 1].fit_ok) {
      const auto x = [&](int i) { return std::log(result.points[i].noise); };
      const auto y = [&](int i) { return std::log(result.points[i].tau); };
      const double d1 = x(best) - x(best - 1), d2 = x(best) - x(best + 1);
      const double f1 = y(best) - y(best - 1), f2 = y(best) - y(best + 1);
      const double denom = d1 * f2 - d2 * f1;
      if (std::abs(denom) > 1e-30)
        peak = std::exp(x(best) - 0.5 * (d1 * d1 * f2 - d2 * d2 * f1) / denom);
    }
    result.peak_noise = peak;
  }
  return result;
}

ScalingFit overlap_scaling_fit(std::span<const double> sizes, std::span<const double> overlaps,
                               std::span<const double> stderrs) {
  if (sizes.size() != overlaps.size() || sizes.size() < 2)
    throw std::invalid_argument("overlap_scaling_fit: need >= 2 matching (N, overlap) points");
  if (!stderrs.empty() && stderrs.size() != sizes.size())
    throw std::invalid_argument("overlap_scaling_fit: stderr length mismatch");
  std::vector<double> x(sizes.begin(), sizes.end());
  std::vector<double> y, w;
  for (size_t i = 0; i < overlaps.size(); ++i) {
    if (overlaps[i] >= 1.0)
      throw std::runtime_error(
          "overlap_scaling_fit: overlap saturated at 1; more trajectories needed to resolve the "
          "deviation");
    y.push_back(std::log(1.0 - overlaps[i]));
    if (!stderrs.empty()) {
      const double sigma = std::max(stderrs[i] / (1.0 - overlaps[i]), 1e-12);
      w.push_back(1.0 / (sigma * sigma));
    } else {
      w.push_back(1.0);
    }
  }
  const double sw = std::accumulate(w.begin(), w.end(), 0.0);
  double xbar = 0, ybar = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    xbar += w[i] * x[i];
    ybar += w[i] * y[i];
  }
  xbar /= sw;
  ybar /= sw;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxx += w[i] * (x[i] - xbar) * (x[i] - xbar);
    sxy += w[i] * (x[i] - xbar) * (y[i] - ybar);
  }
  const double slope = sxy / sxx;
  double se;
  if (!stderrs.empty()) {
    se = std::sqrt(1.0 / sxx);  // known per-point sigmas
  } else {
    double rss = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - ybar - slope * (x[i] - xbar);
      rss += r * r;
    }
    const double dof = std::max<double>(1.0, static_cast<double>(x.size()) - 2.0);
    se = std::sqrt(rss / dof / sxx);
  }
  ScalingFit fit;
  fit.c = -slope;
  fit.ci_low = fit.c - 1.96 * se;
  fit.ci_high = fit.c + 1.96 * se;
  return fit;
}

std::optional<double> equilibration_time(std::span<const double> times,
                                         std::span<const double> series, double epsilon) {
  if (times.size() != series.size() || series.empty())
    throw std::invalid_argument("equilibration_time: mismatched or empty series");
  const int length = static_cast<int>(series.size());
  const int tail = std::max(1, length / 10);
  const double m_ss = mean_of(series.subspan(length - tail));
  constexpr int kSustain = 10;
  const int last_start = length - std::min(kSustain, length);
  for (int i = 0; i <= last_start; ++i) {
    bool ok = true;
    for (int j = i; j < std::min(length, i + kSustain); ++j)
      if (std::abs(series[j] - m_ss) >= epsilon) {
        ok = false;
        break;
      }
    if (ok) return times[i];
  }
  return std::nullopt;
}

}  // namespace dissipmem
