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

#include "riemann/loss.hpp"

#include <algorithm>
#include <cmath>

#include "riemann/errors.hpp"

namespace riemann::opt {

LossValue evaluate_loss(LossKind kind, std::span<const double> y,
                        std::span<const double> target) {
  if (y.size() != target.size())
    throw DimensionMismatch("evaluate_loss: output and target differ in length");
  LossValue out;
  out.gradient.resize(y.size());
  switch (kind) {
    case LossKind::kMeanSquaredError: {
      double acc = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - target[i];
        out.gradient[i] = r;
        acc += r * r;
      }
      out.value = 0.5 * acc;
      return out;
    }
    case LossKind::kSoftmaxCrossEntropy: {
      const double peak = *std::max_element(y.begin(), y.end());
      double total = 0.0;
      for (const double v : y) total += std::exp(v - peak);
      const double logsum = peak + std::log(total);
      double value = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double p = std::exp(y[i] - peak) / total;
        out.gradient[i] = p - target[i];
        value += target[i] * (logsum - y[i]);
      }
      out.value = value;
      return out;
    }
  }
  throw DimensionMismatch("evaluate_loss: unknown loss kind");
}

}  // namespace riemann::opt
