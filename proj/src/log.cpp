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

#include "riemann/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace riemann::log {

namespace {

Level initial_level() {
  const char* env = std::getenv("RIEMANN_LOG_LEVEL");
  if (env == nullptr) return Level::kInfo;
  if (std::strcmp(env, "error") == 0) return Level::kError;
  if (std::strcmp(env, "debug") == 0) return Level::kDebug;
  return Level::kInfo;
}

Level& current() {
  static Level level = initial_level();
  return level;
}

void emit(const char* tag, const std::string& message) {
  std::fprintf(stderr, "[%s] %s\n", tag, message.c_str());
}

}  // namespace

Level level() { return current(); }

void set_level(Level level) { current() = level; }

void error(const std::string& message) { emit("error", message); }

void info(const std::string& message) {
  if (current() >= Level::kInfo) emit("info", message);
}

void debug(const std::string& message) {
  if (current() >= Level::kDebug) emit("debug", message);
}

}  // namespace riemann::log
