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

#ifndef RIEMANN_ERRORS_HPP
#define RIEMANN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace riemann {

/// Root of the library's error hierarchy. Every exception thrown by the
/// library derives from this, so callers can catch riemann::Error to
/// intercept anything we raise while letting genuine logic bugs escape.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A matrix expected to be symmetric positive definite was not: a Cholesky
/// pivot came out non-positive, or an SPD solve was asked of an indefinite
/// operator.
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

/// Asymmetry of an input exceeded the documented tolerance.
class NotSymmetric : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions do not line up for the requested operation.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A non-finite value (NaN or infinity) appeared where finite data is
/// required: overflowing losses, diverging trajectories, bad inputs.
class NonFinite : public Error {
 public:
  using Error::Error;
};

/// An activation tape was consumed with a network it does not belong to.
class StaleTape : public Error {
 public:
  using Error::Error;
};

/// The stacked output Jacobian lost full column rank, so the contraction
/// argument underlying the stability bound does not apply.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// A run configuration failed validation (bad keys, missing files,
/// inconsistent dimensions).
class ConfigInvalid : public Error {
 public:
  using Error::Error;
};

/// Filesystem I/O failed while reading inputs or writing artifacts.
class IoFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace riemann

#endif  // RIEMANN_ERRORS_HPP
