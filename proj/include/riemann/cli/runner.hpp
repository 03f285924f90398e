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

// Subcommand execution.  Each runner reads and validates its whole
// configuration, rejects unread keys, loads inputs, and only then creates
// the output directory, so a rejected run leaves no artifacts behind.

#ifndef RIEMANN_CLI_RUNNER_HPP
#define RIEMANN_CLI_RUNNER_HPP

#include <string>

#include "riemann/cli/config.hpp"

namespace riemann::cli {

/// Process exit codes, stable across releases.  kExitFailure covers library
/// errors without a dedicated class (e.g. a rank-deficient stability run).
enum ExitCode : int {
  kExitSuccess = 0,
  kExitFailure = 1,
  kExitConfigInvalid = 2,
  kExitIoFailure = 3,
  kExitNonFinite = 4,
  kExitVerificationFailure = 5,
};

/// Runs one subcommand (train, verify, stability, bench) against a config,
/// writing artifacts into the config's `out` directory.  Returns an
/// ExitCode for outcomes a run reports (verification failure); throws the
/// library error classes for everything else.
int run_command(const std::string& subcommand, ConfigMap config);

/// run_command with library errors logged and mapped to their ExitCode.
int run_command_exit(const std::string& subcommand, ConfigMap config);

}  // namespace riemann::cli

#endif  // RIEMANN_CLI_RUNNER_HPP
