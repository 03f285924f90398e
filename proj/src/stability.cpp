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

#include "riemann/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "riemann/errors.hpp"
#include "riemann/loss.hpp"
#include "riemann/metric.hpp"

namespace riemann::stability {

namespace {

// G^{-1} v with the block diagonal per-layer metrics; coordinates outside
// parameter blocks cannot exist, so every entry of v is covered.
Vector apply_block_inverse(const Network& net,
                           const std::vector<metric::LayerMetric>& metrics,
                           std::span<const double> v) {
  Vector out(v.size(), 0.0);
  for (int a = 0; a < net.num_layers(); ++a) {
    const graph::Layer& layer = net.layer(a);
    if (layer.param_count == 0) continue;
    const std::span<const double> block{
        v.data() + layer.param_offset,
        static_cast<std::size_t>(layer.param_count)};
    const Vector solved = metric::woodbury_apply_inverse(
        metrics[static_cast<std::size_t>(a)], block);
    std::copy(solved.begin(), solved.end(),
              out.begin() + layer.param_offset);
  }
  return out;
}

double spectral_norm_small_side(const DenseMatrix& j) {
  // rows = output dim, which is the small side here.
  const double top = linalg::max_eigenvalue(linalg::outer_gram(j));
  return std::sqrt(std::max(top, 0.0));
}

double min_parametric_mass(const Network& net,
                           const opt::OptimizerConfig& config) {
  double mu = std::numeric_limits<double>::infinity();
  for (int a = 0; a < net.num_layers(); ++a) {
    if (net.layer(a).param_count == 0) continue;
    mu = std::min(mu, opt::layer_mass(config, a));
  }
  if (!std::isfinite(mu)) throw DimensionMismatch("network has no parameters");
  return mu;
}

Vector sample_loss_gradient(const Network& net, const ParameterState& params,
                            const opt::Sample& sample,
                            const opt::OptimizerConfig& config) {
  const graph::Tape tape = graph::forward(net, params, sample.input);
  const opt::LossValue l =
      opt::evaluate_loss(config.loss, tape.output, sample.target);
  return graph::parameter_gradient(net, params, tape, l.gradient);
}

// Everything one iteration needs about one run at its current parameters,
// computed from a single set of forward passes.  The primed run trains on
// the variant dataset, so its training tape at the replaced index is the
// replacement tape while tapes[] stays on the shared base inputs.
struct IterationPass {
  std::vector<graph::Tape> tapes;
  graph::Tape replacement_tape;
  Vector gradient;
  Vector replacement_loss_gradient;
  std::vector<metric::LayerMetric> metrics;
  std::vector<double> loss_gradient_norms;
};

IterationPass evaluate_run(const Network& net, const ParameterState& params,
                           const PairedDatasets& paired, bool primed,
                           const opt::OptimizerConfig& config) {
  IterationPass pass;
  const std::size_t n = paired.base.size();
  pass.tapes.reserve(n);
  for (const opt::Sample& sample : paired.base)
    pass.tapes.push_back(graph::forward(net, params, sample.input));
  if (primed)
    pass.replacement_tape =
        graph::forward(net, params, paired.replacement.input);

  const auto training_sample = [&](std::size_t j) -> const opt::Sample& {
    return primed && j == paired.replaced_index ? paired.replacement
                                                : paired.base[j];
  };
  const auto training_tape = [&](std::size_t j) -> const graph::Tape& {
    return primed && j == paired.replaced_index ? pass.replacement_tape
                                                : pass.tapes[j];
  };

  pass.gradient.assign(static_cast<std::size_t>(net.total_params()), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const opt::LossValue l = opt::evaluate_loss(
        config.loss, training_tape(j).output, training_sample(j).target);
    pass.loss_gradient_norms.push_back(linalg::norm2(l.gradient));
    const Vector g =
        graph::parameter_gradient(net, params, training_tape(j), l.gradient);
    if (primed && j == paired.replaced_index) pass.replacement_loss_gradient = g;
    linalg::axpy(inv_n, g, pass.gradient);
  }
  if (!linalg::all_finite(pass.gradient))
    throw NonFinite("batch gradient is not finite");

  // Metric assembly mirrors the optimizer: first min(cap, n) training
  // samples contribute rows, every layer gets its mass.
  std::vector<std::vector<DenseMatrix>> jacobians;
  std::vector<metric::OutputMetric> output_metrics;
  if (config.pullback_enabled) {
    const int cap = config.metric_batch_cap;
    const std::size_t count =
        cap > 0 && static_cast<std::size_t>(cap) < n
            ? static_cast<std::size_t>(cap)
            : n;
    for (std::size_t j = 0; j < count; ++j) {
      jacobians.push_back(
          graph::all_layer_jacobians(net, params, training_tape(j)));
      output_metrics.push_back(metric::build_output_metric(
          config.output_metric, training_tape(j).output, config.metric_epsilon,
          config.user_diagonal));
    }
  }
  pass.metrics.reserve(static_cast<std::size_t>(net.num_layers()));
  for (int a = 0; a < net.num_layers(); ++a) {
    metric::LayerMetric m;
    m.layer = a;
    const int param_count = net.layer(a).param_count;
    m.mass = linalg::DiagonalMatrix::uniform(param_count,
                                             opt::layer_mass(config, a));
    if (jacobians.empty()) {
      m.scaled_jacobian = DenseMatrix(0, param_count);
    } else {
      std::vector<DenseMatrix> per_layer;
      per_layer.reserve(jacobians.size());
      for (const auto& js : jacobians)
        per_layer.push_back(js[static_cast<std::size_t>(a)]);
      m.scaled_jacobian =
          metric::stacked_metric_jacobian(per_layer, output_metrics, 0);
    }
    pass.metrics.push_back(std::move(m));
  }
  return pass;
}

// One explicit Euler step of the preconditioned descent.
void apply_update(const Network& net, ParameterState& params,
                  const IterationPass& pass,
                  const opt::OptimizerConfig& config) {
  for (int a = 0; a < net.num_layers(); ++a) {
    const graph::Layer& layer = net.layer(a);
    if (layer.param_count == 0) continue;
    const std::span<const double> g_block{
        pass.gradient.data() + layer.param_offset,
        static_cast<std::size_t>(layer.param_count)};
    const Vector delta = metric::riemannian_gradient(
        pass.metrics[static_cast<std::size_t>(a)], g_block);
    const std::span<double> w = params.block(a);
    for (int i = 0; i < layer.param_count; ++i)
      w[static_cast<std::size_t>(i)] -=
          config.learning_rate * delta[static_cast<std::size_t>(i)];
  }
  if (!linalg::all_finite(params.flat()))
    throw NonFinite("parameters overflowed during the update");
}

// d_i from an already evaluated primed pass; one reverse sweep computes the
// displaced sample's loss gradient, the rest is reused from the pass.
std::vector<Vector> disturbance_from_pass(const Network& net,
                                          const ParameterState& primed,
                                          const IterationPass& pass,
                                          const std::vector<DenseMatrix>& jacs,
                                          const PairedDatasets& paired,
                                          const opt::OptimizerConfig& config) {
  const std::size_t k = paired.replaced_index;
  const opt::LossValue l_minus = opt::evaluate_loss(
      config.loss, pass.tapes[k].output, paired.base[k].target);
  const Vector g_minus =
      graph::parameter_gradient(net, primed, pass.tapes[k], l_minus.gradient);
  Vector bracket(g_minus.size());
  for (std::size_t i = 0; i < bracket.size(); ++i)
    bracket[i] = pass.replacement_loss_gradient[i] - g_minus[i];
  const Vector solved = apply_block_inverse(net, pass.metrics, bracket);
  const double inv_n = 1.0 / static_cast<double>(paired.base.size());
  std::vector<Vector> out;
  out.reserve(paired.base.size());
  for (const DenseMatrix& jac : jacs) {
    Vector d = linalg::matvec(jac, solved);
    for (double& x : d) x *= inv_n;
    out.push_back(std::move(d));
  }
  return out;
}

// H from an already evaluated base pass; reuses its training metrics.
DenseMatrix ntk_from_pass(const Network& net, const ParameterState& params,
                          const IterationPass& pass,
                          std::vector<DenseMatrix>& jacs_out) {
  const int n = static_cast<int>(pass.tapes.size());
  const int p = net.output_dim();
  const int stacked = n * p;
  if (stacked > 512)
    throw DimensionMismatch("stacked output dimension exceeds 512");
  std::vector<Vector> columns;
  std::vector<Vector> preconditioned;
  columns.reserve(static_cast<std::size_t>(stacked));
  preconditioned.reserve(static_cast<std::size_t>(stacked));
  jacs_out.clear();
  jacs_out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    jacs_out.push_back(graph::output_jacobian(
        net, params, pass.tapes[static_cast<std::size_t>(i)]));
    for (int r = 0; r < p; ++r) {
      const std::span<const double> row = jacs_out.back().row(r);
      columns.emplace_back(row.begin(), row.end());
      preconditioned.push_back(
          apply_block_inverse(net, pass.metrics, columns.back()));
    }
  }
  DenseMatrix h(stacked, stacked);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int c = 0; c < stacked; ++c)
    for (int cc = 0; cc < stacked; ++cc)
      h(c, cc) = inv_n * linalg::dot(columns[static_cast<std::size_t>(c)],
                                     preconditioned[static_cast<std::size_t>(cc)]);
  return linalg::symmetrized(h);
}

}  // namespace

std::vector<opt::Sample> PairedDatasets::variant() const {
  if (replaced_index >= base.size())
    throw DimensionMismatch("replaced index is past the end of the dataset");
  std::vector<opt::Sample> out = base;
  out[replaced_index] = replacement;
  return out;
}

double StabilityConstants::divergence_bound() const {
  return 2.0 * kappa * kappa * loss_lipschitz /
         (xi * std::sqrt(static_cast<double>(samples)) * mu);
}

double StabilityConstants::disturbance_bound() const {
  return 2.0 * kappa * kappa * loss_lipschitz /
         (static_cast<double>(samples) * mu);
}

double StabilityConstants::stacked_disturbance_bound() const {
  return 2.0 * kappa * kappa * loss_lipschitz /
         (std::sqrt(static_cast<double>(samples)) * mu);
}

StabilityConstants estimate_constants(const RunArtifacts& artifacts,
                                      double rank_tolerance) {
  if (artifacts.jacobian_norms.empty() || artifacts.loss_gradient_norms.empty() ||
      artifacts.spectrum_minima.empty() || artifacts.sample_count == 0)
    throw DimensionMismatch("constants need at least one sampled observation");
  if (!(artifacts.min_mass > 0.0))
    throw NotPositiveDefinite("mass floor must be positive");
  StabilityConstants c;
  c.xi = *std::min_element(artifacts.spectrum_minima.begin(),
                           artifacts.spectrum_minima.end());
  if (c.xi <= rank_tolerance)
    throw RankDeficient("sampled kernel matrix lost full column rank");
  c.kappa = *std::max_element(artifacts.jacobian_norms.begin(),
                              artifacts.jacobian_norms.end());
  c.loss_lipschitz = *std::max_element(artifacts.loss_gradient_norms.begin(),
                                       artifacts.loss_gradient_norms.end());
  c.mu = artifacts.min_mass;
  c.samples = artifacts.sample_count;
  return c;
}

DenseMatrix ntk_matrix(const Network& net, const ParameterState& params,
                       std::span<const opt::Sample> dataset,
                       const opt::OptimizerConfig& config) {
  const int n = static_cast<int>(dataset.size());
  const int p = net.output_dim();
  if (n == 0) throw DimensionMismatch("empty dataset");
  const int stacked = n * p;
  if (stacked > 512)
    throw DimensionMismatch("stacked output dimension exceeds 512");
  const std::vector<metric::LayerMetric> metrics =
      opt::layer_metrics(net, params, dataset, config);
  // Column c = i p + r of grad ybar is the parameter gradient of output r on
  // sample i.
  std::vector<Vector> columns;
  std::vector<Vector> preconditioned;
  columns.reserve(static_cast<std::size_t>(stacked));
  preconditioned.reserve(static_cast<std::size_t>(stacked));
  for (int i = 0; i < n; ++i) {
    const graph::Tape tape =
        graph::forward(net, params, dataset[static_cast<std::size_t>(i)].input);
    const DenseMatrix jac = graph::output_jacobian(net, params, tape);
    for (int r = 0; r < p; ++r) {
      const std::span<const double> row = jac.row(r);
      columns.emplace_back(row.begin(), row.end());
      preconditioned.push_back(
          apply_block_inverse(net, metrics, columns.back()));
    }
  }
  DenseMatrix h(stacked, stacked);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int c = 0; c < stacked; ++c)
    for (int cc = 0; cc < stacked; ++cc)
      h(c, cc) = inv_n * linalg::dot(columns[static_cast<std::size_t>(c)],
                                     preconditioned[static_cast<std::size_t>(cc)]);
  return linalg::symmetrized(h);
}

std::vector<Vector> replacement_disturbance(const Network& net,
                                            const ParameterState& primed,
                                            const PairedDatasets& paired,
                                            const opt::OptimizerConfig& config) {
  const std::vector<opt::Sample> variant = paired.variant();
  const std::vector<metric::LayerMetric> metrics =
      opt::layer_metrics(net, primed, variant, config);
  const Vector g_plus =
      sample_loss_gradient(net, primed, paired.replacement, config);
  const Vector g_minus =
      sample_loss_gradient(net, primed, paired.base[paired.replaced_index], config);
  Vector bracket(g_plus.size());
  for (std::size_t i = 0; i < bracket.size(); ++i)
    bracket[i] = g_plus[i] - g_minus[i];
  const Vector solved = apply_block_inverse(net, metrics, bracket);
  const double inv_n = 1.0 / static_cast<double>(paired.base.size());
  std::vector<Vector> out;
  out.reserve(paired.base.size());
  for (const opt::Sample& sample : paired.base) {
    const graph::Tape tape = graph::forward(net, primed, sample.input);
    const DenseMatrix jac = graph::output_jacobian(net, primed, tape);
    Vector d = linalg::matvec(jac, solved);
    for (double& x : d) x *= inv_n;
    out.push_back(std::move(d));
  }
  return out;
}

StabilityReport paired_training(const Network& net, const ParameterState& init,
                                const PairedDatasets& paired,
                                const StabilityConfig& config) {
  if (config.steps < 1) throw ConfigInvalid("stability run needs at least one step");
  if (config.spectrum_interval < 1)
    throw ConfigInvalid("spectrum interval must be positive");
  if (paired.replaced_index >= paired.base.size())
    throw DimensionMismatch("replaced index is past the end of the dataset");
  const std::size_t n = paired.base.size();
  const double lr = config.optimizer.learning_rate;

  RunArtifacts artifacts;
  artifacts.sample_count = n;
  artifacts.min_mass = min_parametric_mass(net, config.optimizer);

  StabilityReport report;
  ParameterState theta = init;
  ParameterState theta_primed = init;

  for (int s = 0;; ++s) {
    const double time = static_cast<double>(s) * lr;
    const IterationPass base_pass =
        evaluate_run(net, theta, paired, false, config.optimizer);
    const IterationPass primed_pass =
        evaluate_run(net, theta_primed, paired, true, config.optimizer);

    StepDiagnostics diag;
    diag.step = s;
    diag.time = time;
    for (std::size_t i = 0; i < n; ++i) {
      Vector gap = base_pass.tapes[i].output;
      for (std::size_t r = 0; r < gap.size(); ++r)
        gap[r] -= primed_pass.tapes[i].output[r];
      diag.divergence = std::max(diag.divergence, linalg::norm2(gap));
    }
    for (const double norm : base_pass.loss_gradient_norms)
      artifacts.loss_gradient_norms.push_back(norm);
    for (const double norm : primed_pass.loss_gradient_norms)
      artifacts.loss_gradient_norms.push_back(norm);

    std::vector<DenseMatrix> primed_jacobians;
    primed_jacobians.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      primed_jacobians.push_back(
          graph::output_jacobian(net, theta_primed, primed_pass.tapes[i]));
    const std::vector<Vector> disturbances = disturbance_from_pass(
        net, theta_primed, primed_pass, primed_jacobians, paired,
        config.optimizer);
    double stacked_sq = 0.0;
    for (const Vector& d : disturbances) {
      const double norm = linalg::norm2(d);
      diag.max_disturbance = std::max(diag.max_disturbance, norm);
      stacked_sq += norm * norm;
    }
    diag.stacked_disturbance = std::sqrt(stacked_sq);
    report.history.push_back(diag);

    if (s % config.spectrum_interval == 0 || s == config.steps) {
      std::vector<DenseMatrix> base_jacobians;
      const DenseMatrix h = ntk_from_pass(net, theta, base_pass, base_jacobians);
      const double lambda_min = linalg::min_eigenvalue(h);
      if (lambda_min <= config.rank_tolerance)
        throw RankDeficient("sampled kernel matrix lost full column rank");
      report.spectra.push_back({s, time, lambda_min});
      artifacts.spectrum_minima.push_back(lambda_min);
      for (const DenseMatrix& jac : base_jacobians)
        artifacts.jacobian_norms.push_back(spectral_norm_small_side(jac));
      for (const DenseMatrix& jac : primed_jacobians)
        artifacts.jacobian_norms.push_back(spectral_norm_small_side(jac));
      // Replacement input under both parameter sets.
      const graph::Tape base_rep =
          graph::forward(net, theta, paired.replacement.input);
      artifacts.jacobian_norms.push_back(spectral_norm_small_side(
          graph::output_jacobian(net, theta, base_rep)));
      artifacts.jacobian_norms.push_back(spectral_norm_small_side(
          graph::output_jacobian(net, theta_primed,
                                 primed_pass.replacement_tape)));
    }
    if (s == config.steps) break;
    apply_update(net, theta, base_pass, config.optimizer);
    apply_update(net, theta_primed, primed_pass, config.optimizer);
  }

  report.constants = estimate_constants(artifacts, config.rank_tolerance);
  report.transient_horizon = 5.0 / report.constants.xi;
  report.flow_step_ratio =
      lr * report.constants.kappa * report.constants.kappa /
      report.constants.mu;
  double late = -1.0;
  for (const StepDiagnostics& diag : report.history)
    if (diag.time >= report.transient_horizon)
      late = std::max(late, diag.divergence);
  if (late < 0.0)
    throw ConfigInvalid("run ended before the transient horizon");
  report.observed_divergence = late;
  return report;
}

BoundCheck disturbance_bound_check(const StabilityReport& report,
                                   const StabilityConstants& constants) {
  BoundCheck check;
  check.step_margin = std::numeric_limits<double>::infinity();
  check.stacked_margin = std::numeric_limits<double>::infinity();
  const double step_bound = constants.disturbance_bound();
  const double stacked_bound = constants.stacked_disturbance_bound();
  for (const StepDiagnostics& diag : report.history) {
    check.step_margin =
        std::min(check.step_margin, step_bound - diag.max_disturbance);
    check.stacked_margin =
        std::min(check.stacked_margin, stacked_bound - diag.stacked_disturbance);
  }
  check.passed = check.step_margin >= 0.0 && check.stacked_margin >= 0.0;
  return check;
}

}  // namespace riemann::stability
