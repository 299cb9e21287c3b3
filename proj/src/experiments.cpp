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

#include "dissipmem/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "dissipmem/oracle.hpp"

namespace dissipmem {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// formatting / hashing helpers

std::string fmt(double value) {
  char buffer[40];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

std::string fmt_list(std::span<const double> values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt(values[i]);
  }
  return out;
}

std::string fmt_list(std::span<const int> values) {
  std::string out;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(values[i]);
  }
  return out;
}

// Compact SHA-1, used for the bundle content hash.
class Sha1 {
 public:
  void update(const void* data, size_t length) {
    const auto* bytes = static_cast<const uint8_t*>(data);
    while (length > 0) {
      const size_t take = std::min(length, size_t{64} - buffer_fill_);
      std::memcpy(buffer_ + buffer_fill_, bytes, take);
      buffer_fill_ += take;
      bytes += take;
      length -= take;
      total_ += take;
      if (buffer_fill_ == 64) {
        process();
        buffer_fill_ = 0;
      }
    }
  }

  std::string hex_digest() {
    const uint64_t bit_length = total_ * 8;
    uint8_t pad = 0x80;
    update(&pad, 1);
    pad = 0;
    while (buffer_fill_ != 56) update(&pad, 1);
    uint8_t length_bytes[8];
    for (int i = 0; i < 8; ++i) length_bytes[i] = static_cast<uint8_t>(bit_length >> (56 - 8 * i));
    update(length_bytes, 8);
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (uint32_t word : h_)
      for (int shift = 28; shift >= 0; shift -= 4) out += digits[(word >> shift) & 0xf];
    return out;
  }

 private:
  static uint32_t rol(uint32_t v, int k) { return (v << k) | (v >> (32 - k)); }

  void process() {
    uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t{buffer_[4 * i]} << 24) | (uint32_t{buffer_[4 * i + 1]} << 16) |
             (uint32_t{buffer_[4 * i + 2]} << 8) | uint32_t{buffer_[4 * i + 3]};
    for (int i = 16; i < 80; ++i) w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
    for (int i = 0; i < 80; ++i) {
      uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5a827999;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ed9eba1;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8f1bbcdc;
      } else {
        f = b ^ c ^ d;
        k = 0xca62c1d6;
      }
      const uint32_t temp = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = temp;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
  }

  uint32_t h_[5] = {0x67452301, 0xefcdab89, 0x98badcfe, 0x10325476, 0xc3d2e1f0};
  uint8_t buffer_[64] = {};
  size_t buffer_fill_ = 0;
  uint64_t total_ = 0;
};

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------
// config schema

struct RawEntry {
  std::string value;
  int line = 0;
  bool consumed = false;
};

using RawConfig = std::map<std::string, RawEntry>;

const std::map<std::string, Experiment>& experiment_registry() {
  static const std::map<std::string, Experiment> registry = {
      {"ising-overlap", Experiment::IsingOverlap},
      {"ising-autocorr", Experiment::IsingAutocorr},
      {"ising-metastability", Experiment::IsingMetastability},
      {"ising-equilibration", Experiment::IsingEquilibration},
      {"tc2d-overlap", Experiment::Tc2dOverlap},
      {"tc2d-vs-ising", Experiment::Tc2dVsIsing},
      {"tc4d-autocorr", Experiment::Tc4dAutocorr},
      {"oracle-verify", Experiment::OracleVerify},
  };
  return registry;
}

class ConfigReader {
 public:
  ConfigReader(RawConfig raw, std::vector<ConfigError>& errors)
      : raw_(std::move(raw)), errors_(&errors) {}

  template <typename Parse>
  auto field(const std::string& key, Parse parse, std::optional<decltype(parse(""))> fallback)
      -> decltype(parse("")) {
    auto it = raw_.find(key);
    if (it == raw_.end()) {
      if (!fallback) errors_->push_back({0, "missing required key '" + key + "'"});
      return fallback ? *fallback : decltype(parse("")){};
    }
    it->second.consumed = true;
    try {
      return parse(it->second.value);
    } catch (const std::exception& error) {
      errors_->push_back({it->second.line, "key '" + key + "': " + error.what()});
      return fallback ? *fallback : decltype(parse("")){};
    }
  }

  void finish() {
    for (const auto& [key, entry] : raw_)
      if (!entry.consumed)
        errors_->push_back(
            {entry.line, "unknown key '" + key + "' for this experiment (no keys are ignored)"});
  }

  bool has(const std::string& key) const { return raw_.count(key) != 0; }

 private:
  RawConfig raw_;
  std::vector<ConfigError>* errors_;
};

double parse_double(const std::string& text) {
  size_t consumed = 0;
  const double value = std::stod(text, &consumed);
  if (consumed != text.size()) throw std::invalid_argument("trailing characters after number");
  return value;
}

int parse_int(const std::string& text) {
  size_t consumed = 0;
  const long value = std::stol(text, &consumed);
  if (consumed != text.size()) throw std::invalid_argument("trailing characters after integer");
  return static_cast<int>(value);
}

uint64_t parse_u64(const std::string& text) {
  size_t consumed = 0;
  const unsigned long long value = std::stoull(text, &consumed);
  if (consumed != text.size()) throw std::invalid_argument("trailing characters after integer");
  return value;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, Parse parse) {
  std::vector<T> values;
  std::string item;
  std::stringstream stream(text);
  while (std::getline(stream, item, ',')) {
    const auto begin = item.find_first_not_of(" \t");
    const auto end = item.find_last_not_of(" \t");
    if (begin == std::string::npos) throw std::invalid_argument("empty list element");
    values.push_back(parse(item.substr(begin, end - begin + 1)));
  }
  if (values.empty()) throw std::invalid_argument("empty list");
  return values;
}

RateVariant parse_variant(const std::string& text) {
  if (text == "detailed-balance") return RateVariant::DetailedBalance;
  if (text == "majority-rule") return RateVariant::MajorityRule;
  throw std::invalid_argument("expected 'detailed-balance' or 'majority-rule'");
}

Scheme parse_scheme(const std::string& text) {
  if (text == "global-step") return Scheme::GlobalStepChannel;
  if (text == "constant-rate") return Scheme::ConstantRateEvents;
  throw std::invalid_argument("expected 'global-step' or 'constant-rate'");
}

void check_positive(std::vector<ConfigError>& errors, const std::string& key, double value) {
  if (!(value > 0.0)) errors.push_back({0, "key '" + key + "': must be positive"});
}

}  // namespace

std::string experiment_name(Experiment experiment) {
  for (const auto& [name, value] : experiment_registry())
    if (value == experiment) return name;
  throw std::invalid_argument("unknown experiment tag");
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "experiment = " << experiment_name(experiment) << "\n";
  out << "kappa = " << fmt(kappa) << "\n";
  out << "scheme = "
      << (scheme == Scheme::GlobalStepChannel ? "global-step" : "constant-rate") << "\n";
  out << "seed = " << seed << "\n";
  out << "variant = " << variant_name(variant) << "\n";
  switch (experiment) {
    case Experiment::IsingOverlap:
    case Experiment::Tc2dOverlap:
      out << "noise = " << fmt(noise) << "\n";
      out << "record_stride = " << record_stride << "\n";
      out << "sizes = " << fmt_list(sizes) << "\n";
      out << "t_max = " << fmt(t_max) << "\n";
      out << "trajectories = " << trajectories << "\n";
      break;
    case Experiment::IsingAutocorr:
    case Experiment::Tc4dAutocorr:
      out << "burn_in_frac = " << fmt(burn_in_frac) << "\n";
      out << "max_lag = " << max_lag << "\n";
      out << "noise_grid = " << fmt_list(noise_grid) << "\n";
      out << "record_stride = " << record_stride << "\n";
      out << "size = " << size << "\n";
      out << "t_max = " << fmt(t_max) << "\n";
      out << "trajectories = " << trajectories << "\n";
      break;
    case Experiment::IsingMetastability:
      out << "field_grid = " << fmt_list(field_grid) << "\n";
      out << "noise = " << fmt(noise) << "\n";
      out << "size = " << size << "\n";
      out << "t_max = " << fmt(t_max) << "\n";
      out << "trajectories = " << trajectories << "\n";
      break;
    case Experiment::IsingEquilibration:
      out << "epsilon = " << fmt(epsilon) << "\n";
      out << "init_bias = " << fmt(init_bias) << "\n";
      out << "noise = " << fmt(noise) << "\n";
      out << "record_stride = " << record_stride << "\n";
      out << "sizes = " << fmt_list(sizes) << "\n";
      out << "t_max = " << fmt(t_max) << "\n";
      out << "trajectories = " << trajectories << "\n";
      break;
    case Experiment::Tc2dVsIsing:
      out << "noise_grid = " << fmt_list(noise_grid) << "\n";
      out << "sizes = " << fmt_list(sizes) << "\n";
      out << "sizes_ising = " << fmt_list(sizes_ising) << "\n";
      out << "t_max = " << fmt(t_max) << "\n";
      out << "t_max_ising = " << fmt(t_max_ising) << "\n";
      out << "trajectories = " << trajectories << "\n";
      break;
    case Experiment::OracleVerify:
      break;
  }
  return out.str();
}

std::pair<std::optional<ExperimentConfig>, std::vector<ConfigError>> validate_config(
    const std::filesystem::path& path) {
  std::vector<ConfigError> errors;
  std::ifstream file(path);
  if (!file) {
    errors.push_back({0, "cannot open config file: " + path.string()});
    return {std::nullopt, errors};
  }

  RawConfig raw;
  std::string line;
  int line_number = 0;
  while (std::getline(file, line)) {
    ++line_number;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto equals = line.find('=');
    if (equals == std::string::npos) {
      errors.push_back({line_number, "expected 'key = value'"});
      continue;
    }
    auto trim = [](std::string text) {
      const auto first = text.find_first_not_of(" \t\r");
      if (first == std::string::npos) return std::string();
      const auto last = text.find_last_not_of(" \t\r");
      return text.substr(first, last - first + 1);
    };
    const std::string key = trim(line.substr(0, equals));
    const std::string value = trim(line.substr(equals + 1));
    if (key.empty() || value.empty()) {
      errors.push_back({line_number, "empty key or value"});
      continue;
    }
    if (raw.count(key)) {
      errors.push_back({line_number, "duplicate key '" + key + "'"});
      continue;
    }
    raw[key] = {value, line_number, false};
  }

  auto experiment_entry = raw.find("experiment");
  if (experiment_entry == raw.end()) {
    errors.push_back({0, "missing required key 'experiment'"});
    return {std::nullopt, errors};
  }
  const auto& registry = experiment_registry();
  auto experiment_it = registry.find(experiment_entry->second.value);
  if (experiment_it == registry.end()) {
    errors.push_back({experiment_entry->second.line,
                      "unknown experiment '" + experiment_entry->second.value + "'"});
    return {std::nullopt, errors};
  }
  experiment_entry->second.consumed = true;

  ExperimentConfig config;
  config.experiment = experiment_it->second;
  ConfigReader reader(std::move(raw), errors);
  reader.field("experiment", [](const std::string& v) { return v; },
               std::optional<std::string>{""});

  const auto d = [](double v) { return std::optional<double>{v}; };
  const auto i = [](int v) { return std::optional<int>{v}; };
  config.output_dir = reader.field(
      "output_dir", [](const std::string& v) { return std::filesystem::path(v); },
      std::optional<std::filesystem::path>{});
  config.seed = reader.field("seed", parse_u64, std::optional<uint64_t>{1});
  config.kappa = reader.field("kappa", parse_double, d(1.0));
  check_positive(errors, "kappa", config.kappa);

  const auto double_list = [](const std::string& v) {
    return parse_list<double>(v, parse_double);
  };
  const auto int_list = [](const std::string& v) { return parse_list<int>(v, parse_int); };

  switch (config.experiment) {
    case Experiment::IsingOverlap:
    case Experiment::Tc2dOverlap: {
      const bool ising = config.experiment == Experiment::IsingOverlap;
      config.variant = reader.field("variant", parse_variant,
                                    std::optional<RateVariant>{RateVariant::DetailedBalance});
      config.scheme = reader.field("scheme", parse_scheme,
                                   std::optional<Scheme>{Scheme::GlobalStepChannel});
      config.noise = reader.field("noise", parse_double, d(ising ? 0.02 : 0.01));
      config.sizes = reader.field("sizes", int_list,
                                  std::optional<std::vector<int>>{
                                      ising ? std::vector<int>{5, 7, 9, 11}
                                            : std::vector<int>{4, 6, 8}});
      config.trajectories =
          reader.field("trajectories", parse_int, i(ising ? 10000 : 4000));
      config.t_max = reader.field("t_max", parse_double, d(ising ? 800.0 : 20.0));
      config.record_stride = reader.field("record_stride", parse_int, i(10));
      break;
    }
    case Experiment::IsingAutocorr:
    case Experiment::Tc4dAutocorr: {
      const bool ising = config.experiment == Experiment::IsingAutocorr;
      config.variant = reader.field("variant", parse_variant,
                                    std::optional<RateVariant>{RateVariant::DetailedBalance});
      config.scheme = reader.field("scheme", parse_scheme,
                                   std::optional<Scheme>{Scheme::GlobalStepChannel});
      config.size = reader.field("size", parse_int, i(ising ? 20 : 4));
      config.noise_grid =
          reader.field("noise_grid", double_list, std::optional<std::vector<double>>{});
      config.trajectories = reader.field("trajectories", parse_int, i(ising ? 32 : 20));
      config.t_max = reader.field("t_max", parse_double, d(ising ? 1.0e5 : 2.0e4));
      config.record_stride = reader.field("record_stride", parse_int, i(1));
      config.burn_in_frac = reader.field("burn_in_frac", parse_double, d(0.1));
      config.max_lag = reader.field("max_lag", parse_int, i(2000));
      break;
    }
    case Experiment::IsingMetastability: {
      config.variant = reader.field("variant", parse_variant,
                                    std::optional<RateVariant>{RateVariant::DetailedBalance});
      config.scheme = reader.field("scheme", parse_scheme,
                                   std::optional<Scheme>{Scheme::GlobalStepChannel});
      config.size = reader.field("size", parse_int, i(10));
      config.noise = reader.field("noise", parse_double, d(0.02));
      config.field_grid =
          reader.field("field_grid", double_list, std::optional<std::vector<double>>{});
      if (!reader.has("field_grid"))
        errors.push_back({0,
                          "ising-metastability requires 'field_grid': the metastable lifetime "
                          "is measured against the symmetry-breaking field rate"});
      config.trajectories = reader.field("trajectories", parse_int, i(200));
      config.t_max = reader.field("t_max", parse_double, d(2000.0));
      break;
    }
    case Experiment::IsingEquilibration: {
      config.variant = reader.field("variant", parse_variant,
                                    std::optional<RateVariant>{RateVariant::DetailedBalance});
      config.scheme = reader.field("scheme", parse_scheme,
                                   std::optional<Scheme>{Scheme::GlobalStepChannel});
      config.sizes = reader.field("sizes", int_list,
                                  std::optional<std::vector<int>>{std::vector<int>{10, 20, 30}});
      config.noise = reader.field("noise", parse_double, d(0.02));
      config.trajectories = reader.field("trajectories", parse_int, i(2000));
      config.t_max = reader.field("t_max", parse_double, d(300.0));
      config.record_stride = reader.field("record_stride", parse_int, i(1));
      config.init_bias = reader.field("init_bias", parse_double, d(0.4));
      config.epsilon = reader.field("epsilon", parse_double, d(0.01));
      if (config.init_bias < 0.0 || config.init_bias > 1.0)
        errors.push_back({0, "key 'init_bias': must be a probability"});
      break;
    }
    case Experiment::Tc2dVsIsing: {
      config.variant = reader.field("variant", parse_variant,
                                    std::optional<RateVariant>{RateVariant::DetailedBalance});
      config.scheme = reader.field("scheme", parse_scheme,
                                   std::optional<Scheme>{Scheme::GlobalStepChannel});
      config.noise_grid = reader.field(
          "noise_grid", double_list,
          std::optional<std::vector<double>>{std::vector<double>{0.005, 0.01, 0.02, 0.05, 0.1}});
      config.sizes = reader.field("sizes", int_list,
                                  std::optional<std::vector<int>>{std::vector<int>{4, 6, 8}});
      config.sizes_ising =
          reader.field("sizes_ising", int_list,
                       std::optional<std::vector<int>>{std::vector<int>{5, 7, 9}});
      config.trajectories = reader.field("trajectories", parse_int, i(10000));
      config.t_max = reader.field("t_max", parse_double, d(3.0));
      config.t_max_ising = reader.field("t_max_ising", parse_double, d(200.0));
      break;
    }
    case Experiment::OracleVerify:
      break;
  }
  reader.finish();

  if (config.experiment != Experiment::OracleVerify) {
    if (config.noise < 0.0) errors.push_back({0, "key 'noise': must be non-negative"});
    for (double value : config.noise_grid)
      if (!(value > 0.0)) errors.push_back({0, "key 'noise_grid': rates must be positive"});
    for (double value : config.field_grid)
      if (!(value > 0.0)) errors.push_back({0, "key 'field_grid': rates must be positive"});
    if (config.trajectories < 1) errors.push_back({0, "key 'trajectories': must be >= 1"});
    if (!(config.t_max > 0.0)) errors.push_back({0, "key 't_max': must be positive"});
    if (config.record_stride < 1) errors.push_back({0, "key 'record_stride': must be >= 1"});
  }

  if (!errors.empty()) return {std::nullopt, errors};
  return {config, errors};
}

// ---------------------------------------------------------------------------
// bundle writing

namespace {

class Bundle {
 public:
  explicit Bundle(const ExperimentConfig& config) : config_(config) {
    std::filesystem::create_directories(config.output_dir);
  }

  std::ostringstream& trajectories() { return trajectories_; }
  std::ostringstream& aggregated() { return aggregated_; }
  json& fits() { return fits_; }

  void finalize() {
    write_file("trajectories.csv", trajectories_.str());
    write_file("aggregated.csv", aggregated_.str());
    write_file("fits.json", fits_.dump(2) + "\n");

    Sha1 sha;
    const std::string canonical = config_.canonical_text();
    sha.update(canonical.data(), canonical.size());
    for (const std::string content : {trajectories_.str(), aggregated_.str()})
      sha.update(content.data(), content.size());

    json manifest;
    manifest["toolkit_version"] = kToolkitVersion;
    manifest["experiment"] = experiment_name(config_.experiment);
    manifest["config"] = canonical;
    manifest["content_hash"] = sha.hex_digest();
    write_file("manifest.json", manifest.dump(2) + "\n");
  }

 private:
  void write_file(const std::string& name, const std::string& content) {
    const auto path = config_.output_dir / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out) throw std::runtime_error("failed to write " + path.string());
  }

  const ExperimentConfig& config_;
  std::ostringstream trajectories_;
  std::ostringstream aggregated_;
  json fits_ = json::object();
};

struct OverlapPoint {
  int size = 0;
  double overlap = 0.0;
  double stderr_value = 0.0;
  int n_traj = 0;
};

OverlapPoint run_overlap_point(Model model, const ExperimentConfig& config, double noise,
                               double t_max, int size, int n_threads,
                               std::ostringstream* traj_rows) {
  const LatticeGeometry geo = build_geometry(model, size);
  const StabilizerConfig reference(geo);
  const RateTable rates(model, config.variant, config.kappa, noise);
  EngineConfig engine;
  engine.scheme = config.scheme;
  engine.seed = mix_seed(config.seed, static_cast<uint64_t>(size) * 1000003ULL +
                                          static_cast<uint64_t>(model));
  engine.n_trajectories = config.trajectories;
  engine.t_max = t_max;
  engine.record_stride = std::max(config.record_stride, 1);
  auto records = run_ensemble(reference, rates, engine, n_threads);

  std::vector<DecodeOutcome> outcomes;
  outcomes.reserve(records.size());
  for (size_t index = 0; index < records.size(); ++index) {
    TrajectoryRecord& record = records[index];
    const DecodeOutcome outcome = decode_and_correct(record.final_config, record.tracker);
    outcomes.push_back(outcome);
    if (traj_rows)
      *traj_rows << size << "," << index << "," << outcome.logical_label << ","
                 << outcome.correction_weight << "," << int(outcome.tie_flag) << ","
                 << int(outcome.winding_x) << "," << int(outcome.winding_y) << "\n";
  }
  const Protocol protocol =
      model == Model::Ising2D ? Protocol::IsingMajority : Protocol::ToricWinding;
  OverlapPoint point;
  point.size = size;
  point.overlap = overlap_estimate(outcomes, protocol);
  point.stderr_value =
      std::sqrt(std::max(point.overlap * (1.0 - point.overlap), 1e-300) / outcomes.size());
  point.n_traj = static_cast<int>(outcomes.size());
  return point;
}

void run_overlap_experiment(const ExperimentConfig& config, int n_threads) {
  const Model model =
      config.experiment == Experiment::IsingOverlap ? Model::Ising2D : Model::Toric2D;
  Bundle bundle(config);
  bundle.trajectories() << "N,traj_index,label,weight,tie_flag,winding_x,winding_y\n";
  bundle.aggregated() << "N,overlap,stderr,n_traj\n";

  std::vector<double> sizes, overlaps, stderrs;
  for (int size : config.sizes) {
    const OverlapPoint point = run_overlap_point(model, config, config.noise, config.t_max, size,
                                                 n_threads, &bundle.trajectories());
    bundle.aggregated() << point.size << "," << fmt(point.overlap) << ","
                        << fmt(point.stderr_value) << "," << point.n_traj << "\n";
    sizes.push_back(size);
    overlaps.push_back(point.overlap);
    stderrs.push_back(point.stderr_value);
  }

  // Scaling fit over the resolvable points (overlap < 1).
  std::vector<double> fit_sizes, fit_overlaps, fit_errs;
  int skipped = 0;
  for (size_t k = 0; k < sizes.size(); ++k) {
    if (overlaps[k] >= 1.0) {
      ++skipped;
      continue;
    }
    fit_sizes.push_back(sizes[k]);
    fit_overlaps.push_back(overlaps[k]);
    fit_errs.push_back(stderrs[k]);
  }
  bundle.fits()["skipped_saturated"] = skipped;
  if (fit_sizes.size() >= 2) {
    try {
      const ScalingFit fit = overlap_scaling_fit(fit_sizes, fit_overlaps, fit_errs);
      bundle.fits()["scaling"] = {{"c", fit.c}, {"ci_low", fit.ci_low}, {"ci_high", fit.ci_high}};
    } catch (const std::exception& error) {
      bundle.fits()["scaling_error"] = error.what();
    }
  }
  bundle.finalize();
}

void run_scan_experiment(const ExperimentConfig& config, int n_threads) {
  ScanSettings settings;
  settings.model =
      config.experiment == Experiment::IsingAutocorr ? Model::Ising2D : Model::Toric4D;
  settings.variant = config.variant;
  settings.kappa = config.kappa;
  settings.linear_size = config.size;
  settings.n_threads = n_threads;

  EngineConfig engine;
  engine.scheme = config.scheme;
  engine.seed = config.seed;
  engine.n_trajectories = config.trajectories;
  engine.t_max = config.t_max;
  engine.record_stride = config.record_stride;
  engine.burn_in = config.burn_in_frac * config.t_max;

  const ScanResult result = critical_scan(settings, config.noise_grid, engine, config.max_lag);

  Bundle bundle(config);
  bundle.trajectories() << "noise_rate,traj_index,chi0\n";
  bundle.aggregated() << "noise_rate,tau,tau_err,gamma1,gamma2,residual,n_samples\n";
  json points = json::array();
  for (const ScanPoint& point : result.points) {
    for (size_t index = 0; index < point.traj_variance.size(); ++index)
      bundle.trajectories() << fmt(point.noise) << "," << index << ","
                            << fmt(point.traj_variance[index]) << "\n";
    if (point.fit_ok)
      bundle.aggregated() << fmt(point.noise) << "," << fmt(point.tau) << ","
                          << fmt(point.tau_err) << "," << fmt(point.gamma1) << ","
                          << fmt(point.gamma2) << "," << fmt(point.residual) << ","
                          << point.n_samples << "\n";
    points.push_back({{"noise", point.noise},
                      {"fit_ok", point.fit_ok},
                      {"message", point.message},
                      {"tau", point.tau},
                      {"tau_err", point.tau_err},
                      {"gamma1", point.gamma1},
                      {"gamma2", point.gamma2}});
  }
  bundle.fits()["points"] = points;
  if (result.peak_noise) bundle.fits()["peak_noise"] = *result.peak_noise;
  bundle.finalize();
}

void run_metastability_experiment(const ExperimentConfig& config, int n_threads) {
  const LatticeGeometry geo = build_geometry(Model::Ising2D, config.size);
  Bundle bundle(config);
  bundle.trajectories() << "field_rate,traj_index,lifetime,censored\n";
  bundle.aggregated() << "field_rate,mean_lifetime,stderr,n_censored,n_traj\n";

  for (double field : config.field_grid) {
    const RateTable rates(Model::Ising2D, config.variant, config.kappa, config.noise, field);
    const double dt = rates.dt();
    const int64_t max_steps = std::llround(config.t_max / dt);
    const uint64_t seed = mix_seed(config.seed, std::hash<double>{}(field));

    std::vector<double> lifetime(config.trajectories, -1.0);  // -1 = censored
    parallel_for_index(config.trajectories, n_threads, [&](int index) {
      Rng rng(seed, static_cast<uint64_t>(index));
      StabilizerConfig state(geo);
      for (int s = 0; s < geo.n_sites; ++s) state.flip_site(s);  // start all-down
      for (int64_t step = 1; step <= max_steps; ++step) {
        global_step(state, rates, rng);
        if (state.observables().magnetization >= 0.0) {
          lifetime[index] = static_cast<double>(step) * dt;
          break;
        }
      }
    });

    double sum = 0.0, sum_sq = 0.0;
    int survived = 0, censored = 0;
    for (int index = 0; index < config.trajectories; ++index) {
      const bool is_censored = lifetime[index] < 0.0;
      bundle.trajectories() << fmt(field) << "," << index << ","
                            << fmt(is_censored ? config.t_max : lifetime[index]) << ","
                            << int(is_censored) << "\n";
      if (is_censored) {
        ++censored;
      } else {
        sum += lifetime[index];
        sum_sq += lifetime[index] * lifetime[index];
        ++survived;
      }
    }
    const double mean = survived > 0 ? sum / survived : 0.0;
    const double se =
        survived > 1 ? std::sqrt((sum_sq / survived - mean * mean) / (survived - 1)) : 0.0;
    bundle.aggregated() << fmt(field) << "," << fmt(mean) << "," << fmt(se) << "," << censored
                        << "," << config.trajectories << "\n";
  }
  bundle.fits()["note"] =
      "lifetime vs 1/field_rate is reported as measured; no barrier constant is asserted";
  bundle.finalize();
}

void run_equilibration_experiment(const ExperimentConfig& config, int n_threads) {
  Bundle bundle(config);
  bundle.trajectories() << "N,traj_index,final_magnetization\n";
  bundle.aggregated() << "N,t_eq,censored,t_eq_abs,censored_abs\n";
  json series_json = json::object();

  for (int size : config.sizes) {
    const LatticeGeometry geo = build_geometry(Model::Ising2D, size);
    const RateTable rates(Model::Ising2D, config.variant, config.kappa, config.noise);
    const double dt = rates.dt();
    const int64_t total_steps = std::llround(config.t_max / dt);
    const int64_t n_samples = total_steps / config.record_stride + 1;
    const uint64_t seed = mix_seed(config.seed, static_cast<uint64_t>(size));

    std::vector<std::vector<double>> series(config.trajectories);
    parallel_for_index(config.trajectories, n_threads, [&](int index) {
      Rng rng(seed, static_cast<uint64_t>(index));
      StabilizerConfig state(geo);
      for (int s = 0; s < geo.n_sites; ++s)
        if (rng.next_double() < config.init_bias) state.flip_site(s);
      std::vector<double>& samples = series[index];
      samples.reserve(n_samples);
      for (int64_t step = 0; step <= total_steps; ++step) {
        if (step % config.record_stride == 0)
          samples.push_back(state.observables().magnetization);
        if (step < total_steps) global_step(state, rates, rng);
      }
    });

    // Signed ensemble mean (the relaxation curve); |m| is also folded so
    // the per-well convergence is visible when the two wells both fill.
    std::vector<double> mean(series[0].size(), 0.0), mean_abs(series[0].size(), 0.0);
    for (const auto& samples : series)
      for (size_t k = 0; k < mean.size(); ++k) {
        mean[k] += samples[k];
        mean_abs[k] += std::abs(samples[k]);
      }
    for (double& value : mean) value /= config.trajectories;
    for (double& value : mean_abs) value /= config.trajectories;
    std::vector<double> times(mean.size());
    for (size_t k = 0; k < times.size(); ++k)
      times[k] = static_cast<double>(k) * config.record_stride * dt;

    const auto t_eq = equilibration_time(times, mean, config.epsilon);
    const auto t_eq_abs = equilibration_time(times, mean_abs, config.epsilon);
    bundle.aggregated() << size << "," << fmt(t_eq.value_or(config.t_max)) << ","
                        << int(!t_eq.has_value()) << ","
                        << fmt(t_eq_abs.value_or(config.t_max)) << ","
                        << int(!t_eq_abs.has_value()) << "\n";
    for (int index = 0; index < config.trajectories; ++index)
      bundle.trajectories() << size << "," << index << "," << fmt(series[index].back()) << "\n";
    series_json[std::to_string(size)] = {
        {"times", times}, {"mean", mean}, {"mean_abs", mean_abs}};
  }
  bundle.fits()["series"] = series_json;
  bundle.finalize();
}

void run_compare_experiment(const ExperimentConfig& config, int n_threads) {
  Bundle bundle(config);
  bundle.trajectories() << "model,N,noise,traj_index,label,weight,tie_flag,winding_x,winding_y\n";
  bundle.aggregated() << "model,N,noise,overlap,stderr\n";

  for (double noise : config.noise_grid) {
    for (int size : config.sizes) {
      ExperimentConfig sub = config;
      const OverlapPoint point =
          run_overlap_point(Model::Toric2D, sub, noise, config.t_max, size, n_threads, nullptr);
      bundle.aggregated() << "toric2d," << size << "," << fmt(noise) << "," << fmt(point.overlap)
                          << "," << fmt(point.stderr_value) << "\n";
    }
    for (int size : config.sizes_ising) {
      ExperimentConfig sub = config;
      const OverlapPoint point = run_overlap_point(Model::Ising2D, sub, noise,
                                                   config.t_max_ising, size, n_threads, nullptr);
      bundle.aggregated() << "ising2d," << size << "," << fmt(noise) << "," << fmt(point.overlap)
                          << "," << fmt(point.stderr_value) << "\n";
    }
  }
  bundle.finalize();
}

void run_oracle_experiment(const ExperimentConfig& config) {
  Bundle bundle(config);
  bundle.trajectories() << "check,residual,tolerance,pass\n";
  bundle.aggregated() << "check,residual,tolerance,pass\n";
  json checks = json::array();
  bool all_pass = true;
  for (const VerificationCheck& check : run_verification_suite()) {
    bundle.aggregated() << check.name << "," << fmt(check.residual) << ","
                        << fmt(check.tolerance) << "," << int(check.pass) << "\n";
    checks.push_back({{"check", check.name},
                      {"params", check.params},
                      {"residual", check.residual},
                      {"tolerance", check.tolerance},
                      {"pass", check.pass}});
    all_pass = all_pass && check.pass;
  }
  bundle.fits()["checks"] = checks;
  bundle.fits()["all_pass"] = all_pass;
  bundle.finalize();
  if (!all_pass) throw std::runtime_error("oracle verification suite reported failures");
}

}  // namespace

void run_experiment(const ExperimentConfig& config, int n_threads) {
  switch (config.experiment) {
    case Experiment::IsingOverlap:
    case Experiment::Tc2dOverlap:
      run_overlap_experiment(config, n_threads);
      return;
    case Experiment::IsingAutocorr:
    case Experiment::Tc4dAutocorr:
      run_scan_experiment(config, n_threads);
      return;
    case Experiment::IsingMetastability:
      run_metastability_experiment(config, n_threads);
      return;
    case Experiment::IsingEquilibration:
      run_equilibration_experiment(config, n_threads);
      return;
    case Experiment::Tc2dVsIsing:
      run_compare_experiment(config, n_threads);
      return;
    case Experiment::OracleVerify:
      run_oracle_experiment(config);
      return;
  }
  throw std::invalid_argument("unknown experiment tag");
}

namespace {

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw std::runtime_error("missing bundle file: " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(file, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream stream(line);
    std::string field;
    while (std::getline(stream, field, ',')) fields.push_back(field);
    rows.push_back(std::move(fields));
  }
  return rows;
}

int column_of(const std::vector<std::string>& header, const std::string& name,
              const std::filesystem::path& path) {
  for (size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return static_cast<int>(k);
  throw std::runtime_error("bundle file " + path.string() + " lacks column '" + name + "'");
}

}  // namespace

int emit_plotdata(const std::filesystem::path& bundle_dir, const std::string& figure_tag,
                  const std::filesystem::path& out_path) {
  const auto aggregated_path = bundle_dir / "aggregated.csv";
  const auto rows = read_csv(aggregated_path);
  if (rows.empty()) throw std::runtime_error("empty bundle file: " + aggregated_path.string());
  const auto& header = rows.front();

  std::ostringstream out;
  int skipped = 0;
  if (figure_tag == "overlap") {
    const int column_n = column_of(header, "N", aggregated_path);
    const int column_overlap = column_of(header, "overlap", aggregated_path);
    const int column_err = column_of(header, "stderr", aggregated_path);
    const int column_traj = column_of(header, "n_traj", aggregated_path);
    out << "N,overlap,stderr,n_traj\n";
    for (size_t r = 1; r < rows.size(); ++r)
      out << rows[r][column_n] << "," << rows[r][column_overlap] << "," << rows[r][column_err]
          << "," << rows[r][column_traj] << "\n";
  } else if (figure_tag == "autocorr") {
    const int noise = column_of(header, "noise_rate", aggregated_path);
    const int tau = column_of(header, "tau", aggregated_path);
    const int tau_err = column_of(header, "tau_err", aggregated_path);
    const int gamma1 = column_of(header, "gamma1", aggregated_path);
    const int gamma2 = column_of(header, "gamma2", aggregated_path);
    out << "noise_rate,tau,tau_err,gamma1,gamma2\n";
    for (size_t r = 1; r < rows.size(); ++r)
      out << rows[r][noise] << "," << rows[r][tau] << "," << rows[r][tau_err] << ","
          << rows[r][gamma1] << "," << rows[r][gamma2] << "\n";
  } else if (figure_tag == "log-overlap") {
    const int column_n = column_of(header, "N", aggregated_path);
    const int column_overlap = column_of(header, "overlap", aggregated_path);
    out << "N,log1m_overlap\n";
    for (size_t r = 1; r < rows.size(); ++r) {
      const double overlap = std::stod(rows[r][column_overlap]);
      if (overlap >= 1.0) {
        ++skipped;
        continue;
      }
      out << rows[r][column_n] << "," << fmt(std::log(1.0 - overlap)) << "\n";
    }
  } else {
    throw std::runtime_error("unknown figure tag '" + figure_tag +
                             "' (expected overlap, autocorr, or log-overlap)");
  }

  std::ofstream file(out_path, std::ios::binary);
  file << out.str();
  if (!file) throw std::runtime_error("failed to write " + out_path.string());
  return skipped;
}

std::vector<VerificationCheck> run_verification_suite() {
  std::vector<VerificationCheck> checks;
  const auto add = [&](std::string name, std::string params, double residual, double tolerance,
                       bool pass) {
    checks.push_back({std::move(name), std::move(params), residual, tolerance, pass});
  };

  // (a) 3x3 Ising detailed balance: stationary distribution equals Gibbs.
  {
    const LatticeGeometry geo = build_geometry(Model::Ising2D, 3);
    const RateTable rates(Model::Ising2D, RateVariant::DetailedBalance, 1.0, 0.02);
    const double tv = gibbs_check(geo, rates);
    add("ising3x3-gibbs-detailed-balance", "kappa=1 noise=0.02", tv, 1e-10, tv < 1e-10);

    // (b) The majority rule variant must deviate (detailed balance broken).
    const RateTable majority(Model::Ising2D, RateVariant::MajorityRule, 1.0, 0.02);
    const double tv_mr = gibbs_check(geo, majority);
    add("ising3x3-gibbs-majority-deviates", "kappa=1 noise=0.02", tv_mr, 1e-3, tv_mr > 1e-3);
  }

  // (c) Toric 2x2 star-sector generator matches Gibbs at beta=(1/4)ln[(2k+D)/D].
  {
    const LatticeGeometry geo = build_geometry(Model::Toric2D, 2);
    const RateTable rates(Model::Toric2D, RateVariant::DetailedBalance, 1.0, 0.01);
    const double tv = gibbs_check(geo, rates);
    add("toric2x2-gibbs-detailed-balance", "kappa=1 noise=0.01", tv, 1e-10, tv < 1e-10);
  }

  // (d) Two-qubit correction dissipator: 4 zero modes, 2 after Z1 dephasing.
  {
    const Mat x2 = pauli_x(2, 1);
    const Mat zz = pauli_z(2, 0) * pauli_z(2, 1);
    const Mat corrector = x2 * (Mat::Identity(4, 4) - zz) / 2.0;
    const Liouvillian base = build_liouvillian(4, {{corrector, 1.0, "correct"}});
    const int n_base = zero_modes(base).count;
    add("two-qubit-zero-modes", "single gated correction jump", n_base, 4, n_base == 4);

    const Liouvillian dephased =
        build_liouvillian(4, {{corrector, 1.0, "correct"}, {pauli_z(2, 0), 0.3, "dephase1"}});
    const int n_dephased = zero_modes(dephased).count;
    add("two-qubit-zero-modes-dephased", "added sqrt(0.3) Z1", n_dephased, 2, n_dephased == 2);
  }

  // (e) Channel-spectrum affine relation on the padded 2-spin ring.
  {
    const RateTable ring = RateTable::ring1d(RateVariant::DetailedBalance, 1.0, 0.1);
    const auto jumps = ring_jump_set(2, ring, 0.1, 0.0, true);
    const SpectrumCheck check = channel_spectrum_check(4, jumps);
    add("channel-spectrum-relation", "2-spin ring kappa=1 noise=0.1", check.max_mismatch, 1e-10,
        check.max_mismatch < 1e-10);
  }

  // (f) Symmetry blocks: strong Z2 for pure bit-flip noise, weak-only after
  // adding dephasing.
  {
    const RateTable ring = RateTable::ring1d(RateVariant::DetailedBalance, 1.0, 0.1);
    const int n_spins = 4;
    const int dim = 1 << n_spins;
    Mat parity = Mat::Identity(dim, dim);
    for (int q = 0; q < n_spins; ++q) parity = (parity * pauli_x(n_spins, q)).eval();

    const Liouvillian strong =
        build_liouvillian(dim, ring_jump_set(n_spins, ring, 0.1, 0.0, false));
    const SymmetryBlocks strong_blocks = symmetry_blocks(strong, parity);
    add("ring4-strong-symmetry", "bit-flip noise only",
        std::max(strong_blocks.left_residual, strong_blocks.right_residual), 1e-12,
        strong_blocks.strong);

    const Liouvillian weak =
        build_liouvillian(dim, ring_jump_set(n_spins, ring, 0.1, 0.05, false));
    const SymmetryBlocks weak_blocks = symmetry_blocks(weak, parity);
    add("ring4-weak-symmetry-after-dephasing", "added dephasing 0.05",
        weak_blocks.weak_residual, 1e-12,
        weak_blocks.weak && !weak_blocks.strong);
  }

  return checks;
}

int default_thread_count() {
  if (const char* env = std::getenv("DISSIPMEM_THREADS")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  const unsigned hardware = std::thread::hardware_concurrency();
  return hardware > 0 ? static_cast<int>(hardware) : 1;
}

}  // namespace dissipmem
