// Copyright 2026 The Riemann Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command line driver.  One subcommand per invocation; --out and --seed
// override the config file.  Log verbosity comes from RIEMANN_LOG_LEVEL
// (error|info|debug).

#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "riemann/cli/config.hpp"
#include "riemann/cli/runner.hpp"
#include "riemann/errors.hpp"
#include "riemann/log.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Layerwise Riemannian metric optimizer and verification lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  const std::pair<const char*, const char*> commands[] = {
      {"train", "Run preconditioned training and emit training.csv"},
      {"verify", "Run property suites and emit verify.txt"},
      {"stability", "Run the paired-trajectory experiment"},
      {"bench", "Time the factored metric against dense inversion"},
  };
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "Run configuration file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides config)");
    sub->add_option("--seed", seed, "Run seed (overrides config)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? riemann::cli::kExitSuccess : riemann::cli::kExitConfigInvalid;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    riemann::cli::ConfigMap config = riemann::cli::ConfigMap::load(config_path);
    if (active->count("--out") > 0) config.override_value("out", out_dir);
    if (active->count("--seed") > 0)
      config.override_value("seed", std::to_string(seed));
    return riemann::cli::run_command_exit(active->get_name(), std::move(config));
  } catch (const riemann::IoFailure& e) {
    riemann::log::error(e.what());
    return riemann::cli::kExitIoFailure;
  } catch (const riemann::ConfigInvalid& e) {
    riemann::log::error(e.what());
    return riemann::cli::kExitConfigInvalid;
  }
}
