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

#include "riemann/cli/artifacts.hpp"

#include <cstdio>
#include <fstream>

#include "riemann/errors.hpp"

namespace riemann::cli {

std::string format_float(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void atomic_write_text(const std::filesystem::path& path, std::string_view content) {
  const std::filesystem::path temp = path.string() + ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + temp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoFailure("short write to " + temp.string());
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec)
    throw IoFailure("cannot rename " + temp.string() + " to " + path.string() +
                    ": " + ec.message());
}

std::string resolved_header(const ConfigMap& config) {
  std::string header;
  for (const auto& [key, value] : config.resolved())
    header += "# " + key + " = " + value + "\n";
  return header;
}

}  // namespace riemann::cli
