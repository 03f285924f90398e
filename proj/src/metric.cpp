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

#include "riemann/metric.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "riemann/errors.hpp"

namespace riemann::metric {

namespace {

Vector softmax(std::span<const double> y) {
  const double peak = *std::max_element(y.begin(), y.end());
  Vector p(y.size());
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    p[i] = std::exp(y[i] - peak);
    total += p[i];
  }
  for (double& x : p) x /= total;
  return p;
}

}  // namespace

OutputMetric build_output_metric(OutputMetricKind kind, std::span<const double> y,
                                 double epsilon,
                                 std::span<const double> user_diagonal) {
  const int n = static_cast<int>(y.size());
  OutputMetric out;
  out.kind = kind;
  out.epsilon = epsilon;
  switch (kind) {
    case OutputMetricKind::kIdentity:
      out.factor = UpperTriangularFactor::identity(n);
      return out;
    case OutputMetricKind::kGaussNewtonSoftmaxCE: {
      if (!(epsilon > 0.0))
        throw ConfigInvalid("output metric regularizer must be positive");
      const Vector p = softmax(y);
      DenseMatrix m(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          m(i, j) = (i == j ? p[i] : 0.0) - p[i] * p[j] + (i == j ? epsilon : 0.0);
      out.factor = linalg::cholesky_upper(m);
      return out;
    }
    case OutputMetricKind::kUserDiagonal: {
      if (!(epsilon > 0.0))
        throw ConfigInvalid("output metric regularizer must be positive");
      if (static_cast<int>(user_diagonal.size()) != n)
        throw DimensionMismatch("user diagonal does not match output dimension");
      DenseMatrix factor(n, n);
      for (int i = 0; i < n; ++i) {
        const double entry = user_diagonal[i] + epsilon;
        if (!(entry > 0.0))
          throw NotPositiveDefinite("user diagonal entry " + std::to_string(i) +
                                    " is not positive after regularization");
        factor(i, i) = std::sqrt(entry);
      }
      out.factor = UpperTriangularFactor(std::move(factor));
      return out;
    }
  }
  throw ConfigInvalid("unknown output metric kind");
}

DenseMatrix stacked_metric_jacobian(const std::vector<DenseMatrix>& jacobians,
                                    const std::vector<OutputMetric>& metrics,
                                    int cap) {
  if (jacobians.size() != metrics.size())
    throw DimensionMismatch("one output metric per sample required");
  const int total = static_cast<int>(jacobians.size());
  const int count = (cap > 0 && cap < total) ? cap : total;
  if (count == 0) return DenseMatrix(0, 0);
  const int n_o = jacobians.front().rows();
  const int n_params = jacobians.front().cols();
  DenseMatrix k(count * n_o, n_params);
  const double scale = 1.0 / std::sqrt(static_cast<double>(count));
  for (int s = 0; s < count; ++s) {
    const DenseMatrix& j = jacobians[s];
    const UpperTriangularFactor& l_o = metrics[s].factor;
    if (j.rows() != n_o || j.cols() != n_params || l_o.dim() != n_o)
      throw DimensionMismatch("sample Jacobian shapes disagree");
    // Row r of this block is scale * (L_o J)_r; L_o upper means the sum
    // starts at the diagonal.
    for (int r = 0; r < n_o; ++r)
      for (int c = 0; c < n_params; ++c) {
        double acc = 0.0;
        for (int q = r; q < n_o; ++q) acc += l_o(r, q) * j(q, c);
        k(s * n_o + r, c) = scale * acc;
      }
  }
  return k;
}

Vector woodbury_apply_inverse(const LayerMetric& metric,
                              std::span<const double> v) {
  const int n = metric.mass.dim();
  if (static_cast<int>(v.size()) != n)
    throw DimensionMismatch("woodbury_apply_inverse: vector length mismatch");
  if (!linalg::all_finite(v))
    throw NonFinite("woodbury_apply_inverse: non-finite input");
  const Vector& d = metric.mass.diagonal();
  Vector u(v.begin(), v.end());
  for (int i = 0; i < n; ++i) u[i] /= d[i];
  const DenseMatrix& k = metric.scaled_jacobian;
  if (k.rows() == 0) return u;
  if (k.cols() != n)
    throw DimensionMismatch("woodbury_apply_inverse: K width mismatch");
  const int rows = k.rows();
  // Kd(r, c) = K(r, c) / sqrt(d_c) makes S = I + Kd Kd^T symmetric by
  // construction.
  DenseMatrix kd(rows, n);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < n; ++c) kd(r, c) = k(r, c) / std::sqrt(d[c]);
  DenseMatrix s = linalg::outer_gram(kd);
  for (int r = 0; r < rows; ++r) s(r, r) += 1.0;
  const UpperTriangularFactor chol = linalg::cholesky_upper(s);
  const Vector t = linalg::matvec(k, u);
  const Vector z = linalg::solve_cholesky(chol, t);
  const Vector w = linalg::matvec_transposed(k, z);
  Vector result = u;
  for (int i = 0; i < n; ++i) result[i] -= w[i] / d[i];
  return result;
}

Vector riemannian_gradient(const LayerMetric& metric, std::span<const double> g) {
  return woodbury_apply_inverse(metric, g);
}

}  // namespace riemann::metric
