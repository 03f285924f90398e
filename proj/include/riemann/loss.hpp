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

#ifndef RIEMANN_LOSS_HPP
#define RIEMANN_LOSS_HPP

#include <span>

#include "riemann/linalg.hpp"

namespace riemann::opt {

using linalg::Vector;

enum class LossKind { kMeanSquaredError, kSoftmaxCrossEntropy };

struct LossValue {
  double value = 0.0;
  Vector gradient;  // with respect to the network output
};

/// MeanSquaredError: 0.5 ||y - t||^2, gradient y - t.
/// SoftmaxCrossEntropy: -sum_i t_i log softmax(y)_i with t a probability
/// vector (one-hot targets included), gradient softmax(y) - t.
LossValue evaluate_loss(LossKind kind, std::span<const double> y,
                        std::span<const double> target);

}  // namespace riemann::opt

#endif  // RIEMANN_LOSS_HPP
