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

#ifndef RIEMANN_LOG_HPP
#define RIEMANN_LOG_HPP

#include <string>

namespace riemann::log {

enum class Level { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from RIEMANN_LOG_LEVEL (error|info|debug), read once.
Level level();
void set_level(Level level);

void error(const std::string& message);
void info(const std::string& message);
void debug(const std::string& message);

}  // namespace riemann::log

#endif  // RIEMANN_LOG_HPP
