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

// Artifact emission.  Files are written whole to a temp path and renamed
// into place, so a killed run never leaves a truncated artifact.  Floats
// are serialized with 17 significant digits, which round-trips doubles
// exactly; artifact headers carry the resolved run configuration as `#`
// comment lines.

#ifndef RIEMANN_CLI_ARTIFACTS_HPP
#define RIEMANN_CLI_ARTIFACTS_HPP

#include <filesystem>
#include <string>
#include <string_view>

#include "riemann/cli/config.hpp"

namespace riemann::cli {

/// %.17g, the shortest fixed precision that round-trips IEEE doubles.
std::string format_float(double value);

/// Writes content to path via a sibling temp file and an atomic rename.
/// Throws IoFailure on any filesystem error.
void atomic_write_text(const std::filesystem::path& path, std::string_view content);

/// One `# key = value` line per resolved config entry, sorted by key.
std::string resolved_header(const ConfigMap& config);

}  // namespace riemann::cli

#endif  // RIEMANN_CLI_ARTIFACTS_HPP
