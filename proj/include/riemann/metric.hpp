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

// Layerwise metric G = D + K^T K held in factored form.  D is a positive
// diagonal mass matrix over a layer's parameters and K stacks the
// output-metric-scaled Jacobian rows, so G^-1 can be applied through the
// Woodbury identity with only small dense factorizations: the inner system
// has the stacked output dimension, never the parameter dimension.

#ifndef RIEMANN_METRIC_HPP
#define RIEMANN_METRIC_HPP

#include <span>
#include <vector>

#include "riemann/linalg.hpp"

namespace riemann::metric {

using linalg::DenseMatrix;
using linalg::DiagonalMatrix;
using linalg::UpperTriangularFactor;
using linalg::Vector;

enum class OutputMetricKind { kIdentity, kGaussNewtonSoftmaxCE, kUserDiagonal };

/// Positive definite metric M on the network output space, held as its
/// Cholesky factor L_o with M = L_o^T L_o.
struct OutputMetric {
  OutputMetricKind kind = OutputMetricKind::kIdentity;
  double epsilon = 0.0;
  UpperTriangularFactor factor;

  int dim() const { return factor.dim(); }
};

/// Builds M at the output point y.
///   Identity:            L_o = I exactly, epsilon unused.
///   GaussNewtonSoftmaxCE: M = diag(p) - p p^T + epsilon I, p = softmax(y).
///   UserDiagonal:        M = diag(user_diagonal) + epsilon I.
OutputMetric build_output_metric(OutputMetricKind kind, std::span<const double> y,
                                 double epsilon,
                                 std::span<const double> user_diagonal = {});

/// Factored metric D + K^T K over one layer's parameter block.  K has one
/// row group of the output dimension per contributing sample.
struct LayerMetric {
  int layer = 0;
  DiagonalMatrix mass;
  DenseMatrix scaled_jacobian;
};

/// Stacks L_o(y_i) J_i for the first min(cap, all) samples and scales the
/// stack by 1/sqrt(count), so K^T K is the subsample-averaged pullback
/// metric.  cap = 0 means no cap.
DenseMatrix stacked_metric_jacobian(const std::vector<DenseMatrix>& jacobians,
                                    const std::vector<OutputMetric>& metrics,
                                    int cap = 0);

/// (D + K^T K)^{-1} v through the Woodbury identity:
///   u = D^{-1} v,  S = I + K D^{-1} K^T,  result = u - D^{-1} K^T S^{-1} K u.
/// The only factorization is the Cholesky of S.  With K = 0 the correction
/// vanishes exactly and the result is D^{-1} v bitwise.
Vector woodbury_apply_inverse(const LayerMetric& metric,
                              std::span<const double> v);

/// G^{-1} g for a raw layer gradient g = J^T (dl/dy).
Vector riemannian_gradient(const LayerMetric& metric, std::span<const double> g);

}  // namespace riemann::metric

#endif  // RIEMANN_METRIC_HPP
