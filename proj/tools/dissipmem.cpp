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

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dissipmem/experiments.hpp"

namespace {

int fail(const std::string& where, const std::string& message) {
  nlohmann::json error;
  error["error"] = message;
  error["where"] = where;
  std::cerr << error.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dissipmem: stochastic simulation of dissipative stabilizer memories"};
  app.require_subcommand(1);

  std::string config_path;
  CLI::App* run = app.add_subcommand("run", "run an experiment from a config file");
  run->add_option("config", config_path, "experiment config file")->required();

  CLI::App* verify = app.add_subcommand("verify", "run the exact verification suite");

  std::string bundle_dir, figure_tag, plot_out;
  CLI::App* plotdata =
      app.add_subcommand("plotdata", "emit a plot-ready CSV from a result bundle");
  plotdata->add_option("bundle", bundle_dir, "result bundle directory")->required();
  plotdata->add_option("figure", figure_tag, "figure tag: overlap | autocorr | log-overlap")
      ->required();
  plotdata->add_option("-o,--output", plot_out, "output CSV path (default: stdout name)");

  CLI11_PARSE(app, argc, argv);

  const int threads = dissipmem::default_thread_count();

  if (run->parsed()) {
    auto [config, errors] = dissipmem::validate_config(config_path);
    if (!config) {
      nlohmann::json report;
      report["error"] = "invalid config";
      report["where"] = config_path;
      auto list = nlohmann::json::array();
      for (const auto& error : errors)
        list.push_back({{"line", error.line}, {"message", error.message}});
      report["details"] = list;
      std::cerr << report.dump(2) << "\n";
      return 1;
    }
    try {
      dissipmem::run_experiment(*config, threads);
    } catch (const std::exception& error) {
      return fail("run", error.what());
    }
    std::cout << "wrote bundle: " << config->output_dir.string() << "\n";
    return 0;
  }

  if (verify->parsed()) {
    bool all_pass = true;
    try {
      for (const auto& check : dissipmem::run_verification_suite()) {
        std::printf("%-42s residual=%-12.3e tol=%-9.0e %s\n", check.name.c_str(), check.residual,
                    check.tolerance, check.pass ? "PASS" : "FAIL");
        all_pass = all_pass && check.pass;
      }
    } catch (const std::exception& error) {
      return fail("verify", error.what());
    }
    return all_pass ? 0 : 1;
  }

  if (plotdata->parsed()) {
    if (plot_out.empty()) plot_out = bundle_dir + "/plot_" + figure_tag + ".csv";
    try {
      const int skipped = dissipmem::emit_plotdata(bundle_dir, figure_tag, plot_out);
      if (skipped > 0)
        std::cout << "skipped " << skipped << " saturated row(s) (overlap = 1)\n";
      std::cout << "wrote " << plot_out << "\n";
    } catch (const std::exception& error) {
      return fail("plotdata", error.what());
    }
    return 0;
  }
  return 0;
}
