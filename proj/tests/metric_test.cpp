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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "riemann/errors.hpp"
#include "riemann/linalg.hpp"
#include "riemann/metric.hpp"
#include "riemann/rng.hpp"
#include "support/oracles.hpp"

using riemann::SplitMix64;
using riemann::linalg::DenseMatrix;
using riemann::linalg::DiagonalMatrix;
using riemann::linalg::Vector;
using riemann::metric::LayerMetric;
using riemann::metric::OutputMetric;
using riemann::metric::OutputMetricKind;
namespace linalg = riemann::linalg;
namespace metric = riemann::metric;
namespace testing = riemann::testing;

namespace {

DenseMatrix dense_metric(const LayerMetric& m) {
  const int n = m.mass.dim();
  DenseMatrix g(n, n);
  if (m.scaled_jacobian.rows() > 0) g = linalg::gram(m.scaled_jacobian);
  for (int i = 0; i < n; ++i) g(i, i) += m.mass.diagonal()[i];
  return g;
}

LayerMetric random_layer_metric(SplitMix64& rng, int n_params, int n_rows) {
  LayerMetric m;
  Vector d(static_cast<std::size_t>(n_params));
  // log-uniform masses in [1e-2, 1e2]
  for (double& x : d) x = std::pow(10.0, rng.uniform(-2.0, 2.0));
  m.mass = DiagonalMatrix(std::move(d));
  m.scaled_jacobian = testing::random_matrix(rng, n_rows, n_params);
  return m;
}

double softmax_ce(const Vector& y, std::size_t label) {
  double peak = y[0];
  for (const double v : y) peak = std::max(peak, v);
  double total = 0.0;
  for (const double v : y) total += std::exp(v - peak);
  return std::log(total) - (y[label] - peak);
}

}  // namespace

TEST_CASE("identity output metric factor is exactly the identity") {
  const Vector y = {3.0, -1.0, 0.5};
  const OutputMetric m =
      metric::build_output_metric(OutputMetricKind::kIdentity, y, 1e-6);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(m.factor(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("gauss newton metric at a uniform softmax point") {
  const Vector y = {0.0, 0.0};
  const double eps = 1e-6;
  const OutputMetric m = metric::build_output_metric(
      OutputMetricKind::kGaussNewtonSoftmaxCE, y, eps);
  const DenseMatrix rebuilt = linalg::gram(m.factor.matrix());
  CHECK(rebuilt(0, 0) == doctest::Approx(0.25 + eps).epsilon(1e-12));
  CHECK(rebuilt(0, 1) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(rebuilt(1, 0) == doctest::Approx(-0.25).epsilon(1e-12));
  CHECK(rebuilt(1, 1) == doctest::Approx(0.25 + eps).epsilon(1e-12));
}

TEST_CASE("gauss newton metric matches the cross entropy hessian") {
  SplitMix64 rng(1001);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(5));
    const Vector y = testing::random_vector(rng, n, -2.0, 2.0);
    const double eps = 1e-6;
    const OutputMetric m = metric::build_output_metric(
        OutputMetricKind::kGaussNewtonSoftmaxCE, y, eps);
    const DenseMatrix rebuilt = linalg::gram(m.factor.matrix());
    // Hessian of the cross entropy in y by second central differences; the
    // label does not enter the Hessian.
    const std::size_t label = rng.uniform_index(n);
    const double h = 1e-4;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vector probe = y;
        probe[i] += h;
        probe[j] += h;
        const double fpp = softmax_ce(probe, label);
        probe[j] -= 2 * h;
        const double fpm = softmax_ce(probe, label);
        probe[i] -= 2 * h;
        const double fmm = softmax_ce(probe, label);
        probe[j] += 2 * h;
        const double fmp = softmax_ce(probe, label);
        const double want =
            (fpp - fpm - fmp + fmm) / (4 * h * h) + (i == j ? eps : 0.0);
        CHECK(rebuilt(i, j) == doctest::Approx(want).epsilon(1e-6).scale(1.0));
      }
  }
}

TEST_CASE("user diagonal output metric") {
  const Vector y = {0.0, 0.0, 0.0};
  const Vector diag = {1.0, 4.0, 9.0};
  const double eps = 1e-3;
  const OutputMetric m = metric::build_output_metric(
      OutputMetricKind::kUserDiagonal, y, eps, diag);
  for (int i = 0; i < 3; ++i)
    CHECK(m.factor(i, i) ==
          doctest::Approx(std::sqrt(diag[static_cast<std::size_t>(i)] + eps)));
  CHECK_THROWS_AS(metric::build_output_metric(OutputMetricKind::kUserDiagonal, y,
                                              eps, Vector{1.0, 2.0}),
                  riemann::DimensionMismatch);
  CHECK_THROWS_AS(metric::build_output_metric(OutputMetricKind::kUserDiagonal, y,
                                              1e-3, Vector{1.0, -2.0, 3.0}),
                  riemann::NotPositiveDefinite);
}

TEST_CASE("regularizer must be positive for non identity kinds") {
  const Vector y = {0.0, 0.0};
  CHECK_THROWS_AS(metric::build_output_metric(
                      OutputMetricKind::kGaussNewtonSoftmaxCE, y, 0.0),
                  riemann::ConfigInvalid);
}

TEST_CASE("woodbury with empty K is the mass inverse") {
  LayerMetric m;
  m.mass = DiagonalMatrix::uniform(3, 1.0);
  m.scaled_jacobian = DenseMatrix(0, 0);
  const Vector v = {1.0, -2.0, 0.5};
  const Vector got = metric::woodbury_apply_inverse(m, v);
  CHECK(got == v);
}

TEST_CASE("woodbury on a frozen two by two instance") {
  // D = 2 I, K = [[1, 0]]: the metric is diag(3, 2), so the inverse applied
  // to [1, 1] is [1/3, 1/2].
  LayerMetric m;
  m.mass = DiagonalMatrix::uniform(2, 2.0);
  m.scaled_jacobian = DenseMatrix(1, 2);
  m.scaled_jacobian(0, 0) = 1.0;
  const Vector got = metric::woodbury_apply_inverse(m, Vector{1.0, 1.0});
  CHECK(got[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(got[1] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("woodbury matches a dense solve on random instances") {
  SplitMix64 rng(1002);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(200));
    const int rows = static_cast<int>(rng.uniform_index(11));
    const LayerMetric m = random_layer_metric(rng, n, rows);
    const Vector v = testing::random_vector(rng, n);
    const Vector got = metric::woodbury_apply_inverse(m, v);
    const Vector want = testing::gaussian_solve(dense_metric(m), v);
    CHECK(testing::rel_error(got, want) <= 1e-8);
  }
}

TEST_CASE("metric eigenvalues never drop below the smallest mass") {
  SplitMix64 rng(1003);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(12));
    const int rows = static_cast<int>(rng.uniform_index(5));
    const LayerMetric m = random_layer_metric(rng, n, rows);
    const double lambda_min = linalg::min_eigenvalue(dense_metric(m));
    CHECK(lambda_min >= m.mass.min_entry() - 1e-10);
  }
}

TEST_CASE("applied inverse norm is bounded by the smallest mass") {
  SplitMix64 rng(1004);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(64));
    const int rows = static_cast<int>(rng.uniform_index(8));
    const LayerMetric m = random_layer_metric(rng, n, rows);
    const Vector v = testing::random_vector(rng, n);
    const Vector got = metric::woodbury_apply_inverse(m, v);
    const double mu = m.mass.min_entry();
    CHECK(linalg::norm2(got) <= linalg::norm2(v) / mu * (1.0 + 1e-12));
  }
}

TEST_CASE("scaling the metric by c scales the applied inverse by 1/c") {
  SplitMix64 rng(1005);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(20));
    const int rows = 1 + static_cast<int>(rng.uniform_index(4));
    const LayerMetric m = random_layer_metric(rng, n, rows);
    const double c = std::pow(10.0, rng.uniform(-1.0, 1.0));
    LayerMetric scaled;
    scaled.layer = m.layer;
    Vector d = m.mass.diagonal();
    for (double& x : d) x *= c;
    scaled.mass = DiagonalMatrix(std::move(d));
    scaled.scaled_jacobian = m.scaled_jacobian;
    for (int r = 0; r < scaled.scaled_jacobian.rows(); ++r)
      for (int col = 0; col < scaled.scaled_jacobian.cols(); ++col)
        scaled.scaled_jacobian(r, col) *= std::sqrt(c);
    const Vector v = testing::random_vector(rng, n);
    const Vector base = metric::woodbury_apply_inverse(m, v);
    const Vector got = metric::woodbury_apply_inverse(scaled, v);
    for (std::size_t i = 0; i < v.size(); ++i)
      CHECK(got[i] == doctest::Approx(base[i] / c).epsilon(1e-10));
  }
}

TEST_CASE("only stacked output dimension systems are factored") {
  SplitMix64 rng(1006);
  riemann::linalg::instrumentation::reset();
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 50 + static_cast<int>(rng.uniform_index(150));
    const LayerMetric m = random_layer_metric(rng, n, 4);
    const Vector v = testing::random_vector(rng, n);
    (void)metric::woodbury_apply_inverse(m, v);
  }
  CHECK(riemann::linalg::instrumentation::factorization_count() == 25);
  CHECK(riemann::linalg::instrumentation::max_factorization_dim() == 4);
}

TEST_CASE("riemannian gradient with zero K is mass preconditioning") {
  LayerMetric m;
  m.mass = DiagonalMatrix(Vector{2.0, 4.0});
  m.scaled_jacobian = DenseMatrix(0, 0);
  const Vector got = metric::riemannian_gradient(m, Vector{2.0, 4.0});
  CHECK(got == Vector{1.0, 1.0});
}

TEST_CASE("riemannian gradient of zero is zero") {
  SplitMix64 rng(1007);
  const LayerMetric m = random_layer_metric(rng, 10, 3);
  const Vector got = metric::riemannian_gradient(m, Vector(10, 0.0));
  for (const double x : got) CHECK(x == 0.0);
}

TEST_CASE("riemannian gradient matches a dense oracle on a small instance") {
  SplitMix64 rng(1008);
  for (int trial = 0; trial < 20; ++trial) {
    LayerMetric m;
    const double mu = std::pow(10.0, rng.uniform(-1.0, 1.0));
    m.mass = DiagonalMatrix::uniform(10, mu);
    m.scaled_jacobian = testing::random_matrix(rng, 2, 10);
    const Vector g = testing::random_vector(rng, 10);
    const Vector got = metric::riemannian_gradient(m, g);
    const Vector want = testing::gaussian_solve(dense_metric(m), g);
    CHECK(testing::rel_error(got, want) <= 1e-10);
  }
}

TEST_CASE("stacked jacobians are scaled by the subsample size") {
  SplitMix64 rng(1009);
  const int n_o = 2, n_params = 5;
  std::vector<DenseMatrix> jacobians;
  std::vector<OutputMetric> metrics;
  const Vector y = {0.3, -0.7};
  for (int s = 0; s < 3; ++s) {
    jacobians.push_back(testing::random_matrix(rng, n_o, n_params));
    metrics.push_back(metric::build_output_metric(
        OutputMetricKind::kGaussNewtonSoftmaxCE, y, 1e-4));
  }
  const DenseMatrix k = metric::stacked_metric_jacobian(jacobians, metrics, 2);
  REQUIRE(k.rows() == 4);
  REQUIRE(k.cols() == n_params);
  const double scale = 1.0 / std::sqrt(2.0);
  for (int s = 0; s < 2; ++s) {
    const DenseMatrix lj =
        linalg::matmul(metrics[s].factor.matrix(), jacobians[s]);
    for (int r = 0; r < n_o; ++r)
      for (int c = 0; c < n_params; ++c)
        CHECK(k(s * n_o + r, c) ==
              doctest::Approx(scale * lj(r, c)).epsilon(1e-14));
  }
  // Uncapped: all three samples contribute, scaled by 1/sqrt(3).
  const DenseMatrix full = metric::stacked_metric_jacobian(jacobians, metrics);
  CHECK(full.rows() == 6);
}

TEST_CASE("woodbury rejects non finite input") {
  LayerMetric m;
  m.mass = DiagonalMatrix::uniform(2, 1.0);
  m.scaled_jacobian = DenseMatrix(0, 0);
  const Vector v = {1.0, std::nan("")};
  CHECK_THROWS_AS(metric::woodbury_apply_inverse(m, v), riemann::NonFinite);
}
