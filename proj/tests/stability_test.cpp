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
#include "riemann/module_graph.hpp"
#include "riemann/optimizer.hpp"
#include "riemann/rng.hpp"
#include "riemann/stability.hpp"
#include "support/mlp_fixtures.hpp"
#include "support/oracles.hpp"

using riemann::SplitMix64;
using riemann::graph::Activation;
using riemann::graph::Network;
using riemann::graph::ParameterState;
using riemann::linalg::DenseMatrix;
using riemann::linalg::Vector;
using riemann::opt::OptimizerConfig;
using riemann::opt::Sample;
using riemann::stability::PairedDatasets;
using riemann::stability::RunArtifacts;
using riemann::stability::StabilityConfig;
using riemann::stability::StabilityConstants;
using riemann::stability::StabilityReport;
namespace graph = riemann::graph;
namespace linalg = riemann::linalg;
namespace opt = riemann::opt;
namespace stability = riemann::stability;
namespace testing = riemann::testing;

namespace {

// One weight, no bias: y = w x.
Network scalar_model() { return Network(graph::linear(1, 1)); }

// Orthogonal inputs keep the kernel matrix well conditioned, which keeps
// the transient horizon short.
PairedDatasets orthogonal_instance(int n, double scale, SplitMix64& rng,
                                   double target_spread, double target_shift) {
  PairedDatasets paired;
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.input.assign(static_cast<std::size_t>(n), 0.0);
    s.input[static_cast<std::size_t>(i)] = scale;
    s.target = {rng.uniform(-target_spread, target_spread)};
    paired.base.push_back(s);
  }
  paired.replaced_index = static_cast<std::size_t>(n - 1);
  paired.replacement = paired.base.back();
  paired.replacement.target[0] += target_shift;
  return paired;
}

Network small_tanh_net(int input_dim, int width) {
  return Network(graph::compose_sequential(
      {graph::linear(input_dim, width), graph::bias(width),
       graph::pointwise(Activation::kTanh, width), graph::linear(width, 1),
       graph::bias(1)}));
}

// Dense block diagonal training metric, assembled without the factored
// representation: per layer mass * I + mean of J^T M J over the batch.
DenseMatrix dense_training_metric(const Network& net,
                                  const ParameterState& params,
                                  std::span<const Sample> batch,
                                  const OptimizerConfig& config) {
  const int m = net.total_params();
  DenseMatrix g(m, m);
  for (int a = 0; a < net.num_layers(); ++a) {
    const graph::Layer& layer = net.layer(a);
    for (int i = 0; i < layer.param_count; ++i)
      g(layer.param_offset + i, layer.param_offset + i) =
          opt::layer_mass(config, a);
  }
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Sample& s : batch) {
    const graph::Tape tape = graph::forward(net, params, s.input);
    const auto jacobians = graph::all_layer_jacobians(net, params, tape);
    for (int a = 0; a < net.num_layers(); ++a) {
      const graph::Layer& layer = net.layer(a);
      if (layer.param_count == 0) continue;
      const DenseMatrix& j = jacobians[static_cast<std::size_t>(a)];
      const DenseMatrix jtj = linalg::gram(j);
      for (int r = 0; r < layer.param_count; ++r)
        for (int c = 0; c < layer.param_count; ++c)
          g(layer.param_offset + r, layer.param_offset + c) +=
              inv_b * jtj(r, c);
    }
  }
  return g;
}

}  // namespace

TEST_CASE("kernel matrix of a one weight linear model is x_i x_j over n") {
  const Network net = scalar_model();
  ParameterState params(net);
  params.flat() = {0.7};
  const std::vector<Sample> data = {{Vector{1.0}, Vector{0.0}},
                                    {Vector{-2.0}, Vector{0.0}},
                                    {Vector{0.5}, Vector{0.0}}};
  OptimizerConfig config;
  config.mass = 1.0;
  config.pullback_enabled = false;  // G = I exactly
  const DenseMatrix h = stability::ntk_matrix(net, params, data, config);
  REQUIRE(h.rows() == 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(h(i, j) == doctest::Approx(data[static_cast<std::size_t>(i)].input[0] *
                                       data[static_cast<std::size_t>(j)].input[0] /
                                       3.0)
                           .epsilon(1e-15));
}

TEST_CASE("more stacked outputs than parameters forces a zero eigenvalue") {
  const Network net = scalar_model();
  ParameterState params(net);
  params.flat() = {1.0};
  const std::vector<Sample> data = {{Vector{1.0}, Vector{0.0}},
                                    {Vector{2.0}, Vector{0.0}}};
  OptimizerConfig config;
  const DenseMatrix h = stability::ntk_matrix(net, params, data, config);
  const double lambda_min = linalg::min_eigenvalue(h);
  const double lambda_max = linalg::max_eigenvalue(h);
  CHECK(std::abs(lambda_min) <= 1e-12 * std::max(lambda_max, 1.0));
}

TEST_CASE("kernel matrix matches the dense metric construction") {
  SplitMix64 rng(4001);
  for (int trial = 0; trial < 8; ++trial) {
    const Network net(
        testing::mlp(testing::random_dims(rng, 3, 6), Activation::kTanh));
    const ParameterState params = ParameterState::random_init(net, rng);
    const int n = 2 + static_cast<int>(rng.uniform_index(3));
    std::vector<Sample> data;
    for (int i = 0; i < n; ++i)
      data.push_back({testing::random_vector(rng, net.input_dim()),
                      testing::random_vector(rng, net.output_dim())});
    OptimizerConfig config;
    config.mass = 0.5 + rng.uniform();
    const DenseMatrix h = stability::ntk_matrix(net, params, data, config);

    const DenseMatrix g = dense_training_metric(net, params, data, config);
    const DenseMatrix g_inv = testing::gaussian_inverse(g);
    const int p = net.output_dim();
    DenseMatrix grad(net.total_params(), n * p);
    for (int i = 0; i < n; ++i) {
      const graph::Tape tape =
          graph::forward(net, params, data[static_cast<std::size_t>(i)].input);
      const DenseMatrix j = graph::output_jacobian(net, params, tape);
      for (int r = 0; r < p; ++r)
        for (int c = 0; c < net.total_params(); ++c)
          grad(c, i * p + r) = j(r, c);
    }
    const DenseMatrix want = linalg::matmul(
        linalg::transpose(grad), linalg::matmul(g_inv, grad));
    double scale = 0.0;
    DenseMatrix diff = h;
    for (int r = 0; r < diff.rows(); ++r)
      for (int c = 0; c < diff.cols(); ++c) {
        diff(r, c) -= want(r, c) / static_cast<double>(n);
        scale = std::max(scale, std::abs(want(r, c) / static_cast<double>(n)));
      }
    CHECK(linalg::frobenius_norm(diff) <= 1e-8 * std::max(scale, 1.0));
  }
}

TEST_CASE("kernel matrix is symmetric positive semidefinite") {
  SplitMix64 rng(4002);
  const Network net = small_tanh_net(3, 5);
  const ParameterState params = ParameterState::random_init(net, rng);
  std::vector<Sample> data;
  for (int i = 0; i < 4; ++i)
    data.push_back({testing::random_vector(rng, 3), testing::random_vector(rng, 1)});
  OptimizerConfig config;
  const DenseMatrix h = stability::ntk_matrix(net, params, data, config);
  CHECK(linalg::asymmetry(h) == 0.0);
  const Vector eigs = linalg::symmetric_eigenvalues(h);
  for (const double e : eigs) CHECK(e >= -1e-12 * std::abs(eigs.back()));
}

TEST_CASE("stacked output limit is enforced") {
  const Network net = scalar_model();
  ParameterState params(net);
  params.flat() = {1.0};
  std::vector<Sample> data(513, Sample{Vector{1.0}, Vector{0.0}});
  OptimizerConfig config;
  CHECK_THROWS_AS(stability::ntk_matrix(net, params, data, config),
                  riemann::DimensionMismatch);
}

TEST_CASE("constants reduce artifact extremes and scale as the formulas say") {
  RunArtifacts art;
  art.jacobian_norms = {1.0, 3.0, 2.0};
  art.loss_gradient_norms = {0.5, 0.25};
  art.spectrum_minima = {0.2, 0.4};
  art.min_mass = 0.5;
  art.sample_count = 16;
  const StabilityConstants c = stability::estimate_constants(art);
  CHECK(c.kappa == 3.0);
  CHECK(c.loss_lipschitz == 0.5);
  CHECK(c.xi == 0.2);
  CHECK(c.mu == 0.5);
  // 2 k^2 L / (xi sqrt(n) mu) = 2 * 9 * 0.5 / (0.2 * 4 * 0.5)
  CHECK(c.divergence_bound() == doctest::Approx(22.5).epsilon(1e-15));
  CHECK(c.disturbance_bound() == doctest::Approx(9.0 / 8.0).epsilon(1e-15));
  CHECK(c.stacked_disturbance_bound() == doctest::Approx(4.5).epsilon(1e-15));

  // Doubling n at fixed constants shrinks the divergence bound by sqrt(2).
  RunArtifacts doubled = art;
  doubled.sample_count = 32;
  const StabilityConstants c2 = stability::estimate_constants(doubled);
  CHECK(c2.divergence_bound() / c.divergence_bound() ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("rank deficiency and empty artifacts are rejected") {
  RunArtifacts art;
  art.jacobian_norms = {1.0};
  art.loss_gradient_norms = {1.0};
  art.spectrum_minima = {1e-11};
  art.min_mass = 1.0;
  art.sample_count = 4;
  CHECK_THROWS_AS(stability::estimate_constants(art), riemann::RankDeficient);
  art.spectrum_minima = {0.5};
  art.min_mass = 0.0;
  CHECK_THROWS_AS(stability::estimate_constants(art),
                  riemann::NotPositiveDefinite);
  art.min_mass = 1.0;
  art.jacobian_norms.clear();
  CHECK_THROWS_AS(stability::estimate_constants(art),
                  riemann::DimensionMismatch);
}

TEST_CASE("constant jacobian model recovers its spectral norm and xi exactly") {
  // y = w x, one sample: J = x independent of w, H = x^2 / (mu + x^2) with
  // the pullback on (K = x / sqrt(1), M = I), so kappa and xi have closed
  // forms.
  const Network net = scalar_model();
  ParameterState params(net);
  params.flat() = {0.3};
  PairedDatasets paired;
  paired.base = {Sample{Vector{2.0}, Vector{1.0}}};
  paired.replaced_index = 0;
  paired.replacement = Sample{Vector{2.0}, Vector{1.0}};
  StabilityConfig config;
  config.optimizer.learning_rate = 1e-3;
  config.optimizer.mass = 4.0;
  // The horizon is 5 / xi = 10 exactly, so the run must pass time 10.
  config.steps = 10100;
  config.spectrum_interval = 100;
  const StabilityReport report =
      stability::paired_training(net, params, paired, config);
  CHECK(report.constants.kappa == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(report.constants.mu == 4.0);
  // H = x^2 / (mu + x^2) = 4 / 8.
  CHECK(report.constants.xi == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.transient_horizon == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("null replacement produces bitwise identical trajectories") {
  // Orthogonal two sample linear instance: the kernel is 0.5 I exactly, so
  // the horizon is 10 and the run length is deterministic.
  const Network net(graph::linear(2, 1));
  ParameterState params(net);
  params.flat() = {0.3, -0.6};
  PairedDatasets paired;
  paired.base = {Sample{Vector{2.0, 0.0}, Vector{0.4}},
                 Sample{Vector{0.0, 2.0}, Vector{-0.2}}};
  paired.replaced_index = 1;
  paired.replacement = paired.base[1];
  StabilityConfig config;
  config.optimizer.mass = 2.0;
  config.optimizer.learning_rate = 5e-4;
  config.steps = 20050;
  config.spectrum_interval = 500;
  const StabilityReport report =
      stability::paired_training(net, params, paired, config);
  for (const auto& diag : report.history) {
    CHECK(diag.divergence == 0.0);
    CHECK(diag.max_disturbance == 0.0);
    CHECK(diag.stacked_disturbance == 0.0);
  }
  CHECK(report.observed_divergence == 0.0);
  CHECK(report.constants.xi == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("hand computed disturbance on a linear model") {
  // y = W x with W 1x2; J(x) = x^T, loss gradient w.r.t. params is
  // (y - t) x, metric G = mu I + mean over metric samples of x x^T.
  const Network net(graph::linear(2, 1));
  ParameterState params(net);
  params.flat() = {0.4, -0.2};
  PairedDatasets paired;
  paired.base = {Sample{Vector{1.0, 0.5}, Vector{0.2}},
                 Sample{Vector{-0.3, 0.8}, Vector{-0.1}}};
  paired.replaced_index = 1;
  paired.replacement = Sample{Vector{0.6, -0.4}, Vector{0.5}};
  OptimizerConfig config;
  config.mass = 2.0;

  const auto disturbances =
      stability::replacement_disturbance(net, params, paired, config);
  REQUIRE(disturbances.size() == 2);

  // Oracle: dense evaluation of the bracketed difference.
  const auto predict = [&](const Vector& x) {
    return params.flat()[0] * x[0] + params.flat()[1] * x[1];
  };
  const auto loss_grad = [&](const Sample& s) {
    const double r = predict(s.input) - s.target[0];
    return Vector{r * s.input[0], r * s.input[1]};
  };
  // Variant dataset metric: samples are base[0] and the replacement.
  DenseMatrix g(2, 2);
  g(0, 0) = g(1, 1) = config.mass;
  for (const Sample& s : {paired.base[0], paired.replacement})
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c)
        g(r, c) += 0.5 * s.input[static_cast<std::size_t>(r)] *
                   s.input[static_cast<std::size_t>(c)];
  const Vector g_plus = loss_grad(paired.replacement);
  const Vector g_minus = loss_grad(paired.base[1]);
  const Vector bracket = {g_plus[0] - g_minus[0], g_plus[1] - g_minus[1]};
  const Vector solved = testing::gaussian_solve(g, bracket);
  for (std::size_t i = 0; i < 2; ++i) {
    const double want =
        0.5 * (paired.base[i].input[0] * solved[0] +
               paired.base[i].input[1] * solved[1]);
    CHECK(disturbances[i][0] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("paired run respects the divergence and disturbance bounds end to end") {
  SplitMix64 rng(4004);
  const int n = 3;
  const Network net = small_tanh_net(n, 10);
  const ParameterState params = ParameterState::random_init(net, rng);
  const PairedDatasets paired = orthogonal_instance(n, 2.0, rng, 0.4, 0.4);
  StabilityConfig config;
  config.optimizer.learning_rate = 1.5e-4;
  config.steps = 90000;
  config.spectrum_interval = 3000;
  const StabilityReport report =
      stability::paired_training(net, params, paired, config);
  CHECK(report.constants.xi > 0.0);
  CHECK(report.transient_horizon <= report.history.back().time);
  CHECK(report.observed_divergence <= report.constants.divergence_bound());
  CHECK(report.observed_divergence > 0.0);
  const auto check = stability::disturbance_bound_check(report, report.constants);
  CHECK(check.passed);
  CHECK(check.step_margin >= 0.0);
  CHECK(check.stacked_margin >= 0.0);
  // The recorded disturbances really are nonzero, so the check is not
  // vacuous.
  double peak = 0.0;
  for (const auto& diag : report.history)
    peak = std::max(peak, diag.max_disturbance);
  CHECK(peak > 0.0);
}

TEST_CASE("raising every mass never raises the recorded disturbances") {
  SplitMix64 rng(4005);
  const int n = 3;
  const Network net = small_tanh_net(n, 8);
  const ParameterState init = ParameterState::random_init(net, rng);
  const PairedDatasets paired = orthogonal_instance(n, 2.0, rng, 0.4, 0.4);
  const std::vector<Sample> variant = paired.variant();
  double previous_peak = -1.0;
  for (const double mass : {1.0, 2.0, 4.0}) {
    OptimizerConfig config;
    config.mass = mass;
    config.learning_rate = 1e-4;
    ParameterState primed = init;
    double peak = 0.0;
    for (int step = 0; step < 300; ++step) {
      const auto disturbances =
          stability::replacement_disturbance(net, primed, paired, config);
      for (const auto& d : disturbances)
        peak = std::max(peak, linalg::norm2(d));
      primed = opt::riemannian_sgd_step(net, primed, variant, config).params;
    }
    CHECK(peak > 0.0);
    if (previous_peak >= 0.0) CHECK(peak <= previous_peak);
    previous_peak = peak;
  }
}

TEST_CASE("lockstep internals match the standalone operations") {
  // Same deterministic-horizon construction as the null replacement case,
  // now with a real target change at the replaced index.
  const Network net(graph::linear(2, 1));
  ParameterState params(net);
  params.flat() = {0.3, -0.6};
  PairedDatasets paired;
  paired.base = {Sample{Vector{2.0, 0.0}, Vector{0.4}},
                 Sample{Vector{0.0, 2.0}, Vector{-0.2}}};
  paired.replaced_index = 1;
  paired.replacement = Sample{Vector{0.0, 2.0}, Vector{0.3}};
  StabilityConfig config;
  config.optimizer.mass = 2.0;
  config.optimizer.learning_rate = 5e-4;
  config.steps = 20050;
  config.spectrum_interval = 500;
  const StabilityReport report =
      stability::paired_training(net, params, paired, config);
  // Step zero diagnostics come from the shared initialization, so the
  // standalone operations at those parameters must agree.
  const auto disturbances =
      stability::replacement_disturbance(net, params, paired, config.optimizer);
  double max_d = 0.0;
  double stacked_sq = 0.0;
  for (const auto& d : disturbances) {
    max_d = std::max(max_d, linalg::norm2(d));
    stacked_sq += linalg::dot(d, d);
  }
  CHECK(report.history.front().max_disturbance ==
        doctest::Approx(max_d).epsilon(1e-14));
  CHECK(report.history.front().stacked_disturbance ==
        doctest::Approx(std::sqrt(stacked_sq)).epsilon(1e-14));
  const DenseMatrix h =
      stability::ntk_matrix(net, params, paired.base, config.optimizer);
  CHECK(report.spectra.front().lambda_min ==
        doctest::Approx(linalg::min_eigenvalue(h)).epsilon(1e-12));
}

TEST_CASE("disturbance check reports negative margins on shrunk constants") {
  const Network net(graph::linear(2, 1));
  ParameterState params(net);
  params.flat() = {0.1, 0.5};
  PairedDatasets paired;
  paired.base = {Sample{Vector{2.0, 0.0}, Vector{0.4}},
                 Sample{Vector{0.0, 2.0}, Vector{-0.2}}};
  paired.replaced_index = 0;
  paired.replacement = Sample{Vector{2.0, 0.0}, Vector{-0.4}};
  StabilityConfig config;
  config.optimizer.mass = 2.0;
  config.optimizer.learning_rate = 5e-4;
  config.steps = 20050;
  config.spectrum_interval = 500;
  const StabilityReport report =
      stability::paired_training(net, params, paired, config);
  const auto good = stability::disturbance_bound_check(report, report.constants);
  CHECK(good.passed);
  StabilityConstants shrunk = report.constants;
  shrunk.kappa = 1e-8;
  const auto bad = stability::disturbance_bound_check(report, shrunk);
  CHECK_FALSE(bad.passed);
  CHECK(bad.step_margin < 0.0);
}

TEST_CASE("invalid paired configurations are rejected") {
  SplitMix64 rng(4008);
  const Network net = small_tanh_net(2, 4);
  const ParameterState params = ParameterState::random_init(net, rng);
  PairedDatasets paired = orthogonal_instance(2, 1.0, rng, 0.4, 0.3);
  StabilityConfig config;
  config.steps = 0;
  CHECK_THROWS_AS(stability::paired_training(net, params, paired, config),
                  riemann::ConfigInvalid);
  config.steps = 10;
  config.spectrum_interval = 0;
  CHECK_THROWS_AS(stability::paired_training(net, params, paired, config),
                  riemann::ConfigInvalid);
  config.spectrum_interval = 5;
  paired.replaced_index = 7;
  CHECK_THROWS_AS(stability::paired_training(net, params, paired, config),
                  riemann::DimensionMismatch);
  CHECK_THROWS_AS(paired.variant(), riemann::DimensionMismatch);
}

TEST_CASE("too short a run fails the horizon requirement") {
  SplitMix64 rng(4009);
  const Network net = small_tanh_net(3, 8);
  const ParameterState params = ParameterState::random_init(net, rng);
  const PairedDatasets paired = orthogonal_instance(3, 2.0, rng, 0.4, 0.3);
  StabilityConfig config;
  config.optimizer.learning_rate = 1e-4;
  config.steps = 100;
  config.spectrum_interval = 10;
  CHECK_THROWS_AS(stability::paired_training(net, params, paired, config),
                  riemann::ConfigInvalid);
}
