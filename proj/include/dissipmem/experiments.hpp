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

#ifndef DISSIPMEM_EXPERIMENTS_HPP
#define DISSIPMEM_EXPERIMENTS_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dissipmem/analysis.hpp"

namespace dissipmem {

inline constexpr const char* kToolkitVersion = "0.1.0";

enum class Experiment {
  IsingOverlap,
  IsingAutocorr,
  IsingMetastability,
  IsingEquilibration,
  Tc2dOverlap,
  Tc2dVsIsing,
  Tc4dAutocorr,
  OracleVerify,
};

std::string experiment_name(Experiment experiment);

/// Flat, typed experiment description. Every physics parameter appears
/// exactly once; re-running the same config byte-reproduces every output.
struct ExperimentConfig {
  Experiment experiment = Experiment::OracleVerify;
  RateVariant variant = RateVariant::DetailedBalance;
  double kappa = 1.0;
  double noise = 0.0;
  std::vector<double> noise_grid;
  std::vector<double> field_grid;
  int size = 0;
  std::vector<int> sizes;
  std::vector<int> sizes_ising;  // tc2d-vs-ising only
  Scheme scheme = Scheme::GlobalStepChannel;
  uint64_t seed = 1;
  int trajectories = 0;
  double t_max = 0.0;
  double t_max_ising = 0.0;  // tc2d-vs-ising only
  int record_stride = 1;
  double burn_in_frac = 0.0;
  int max_lag = 2000;
  double init_bias = 0.4;  // equilibration: probability a spin starts flipped
  double epsilon = 0.01;   // equilibration threshold
  std::filesystem::path output_dir;

  /// Canonical key=value text form (sorted keys), used for the manifest
  /// and the content hash.
  std::string canonical_text() const;
};

struct ConfigError {
  int line = 0;  // 0 = file-level
  std::string message;
};

/// Parses and validates a flat key=value config file. Unknown keys are
/// errors; missing optional keys get the documented per-experiment
/// defaults. Returns either a normalized config or the full error list.
std::pair<std::optional<ExperimentConfig>, std::vector<ConfigError>> validate_config(
    const std::filesystem::path& path);

/// Runs the experiment and writes the result bundle (manifest.json,
/// trajectories.csv, aggregated.csv, fits.json) under config.output_dir.
/// Throws std::runtime_error with a descriptive message on failure.
void run_experiment(const ExperimentConfig& config, int n_threads);

/// Emits a tidy plot-ready CSV from a completed bundle. Supported figure
/// tags: "overlap" (N, overlap, stderr, n_traj), "autocorr" (noise_rate,
/// tau, tau_err, gamma1, gamma2), "log-overlap" (N, log1m_overlap;
/// saturated rows skipped, skip count returned). Missing bundle files are
/// reported by name.
int emit_plotdata(const std::filesystem::path& bundle_dir, const std::string& figure_tag,
                  const std::filesystem::path& out_path);

struct VerificationCheck {
  std::string name;
  std::string params;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Exact small-system verification suite (classical Gibbs stationarity,
/// zero-mode counts, channel-spectrum relation, symmetry blocks).
std::vector<VerificationCheck> run_verification_suite();

/// Thread budget: DISSIPMEM_THREADS if set, hardware concurrency otherwise.
int default_thread_count();

}  // namespace dissipmem

#endif  // DISSIPMEM_EXPERIMENTS_HPP
