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

#include "riemann/optimizer.hpp"

#include <chrono>
#include <cmath>

#include "riemann/errors.hpp"

namespace riemann::opt {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

/// Per-sample pieces needed to assemble every layer's K for one batch.
struct BatchLinearization {
  std::vector<std::vector<linalg::DenseMatrix>> sample_jacobians;  // [sample][layer]
  std::vector<metric::OutputMetric> output_metrics;                // [sample]
};

BatchLinearization linearize_batch(const Network& net,
                                   const ParameterState& params,
                                   std::span<const Sample> batch,
                                   const OptimizerConfig& config, int cap) {
  BatchLinearization lin;
  const int count = cap > 0 && cap < static_cast<int>(batch.size())
                        ? cap
                        : static_cast<int>(batch.size());
  lin.sample_jacobians.reserve(count);
  lin.output_metrics.reserve(count);
  for (int i = 0; i < count; ++i) {
    const graph::Tape tape = graph::forward(net, params, batch[i].input);
    lin.sample_jacobians.push_back(graph::all_layer_jacobians(net, params, tape));
    lin.output_metrics.push_back(metric::build_output_metric(
        config.output_metric, tape.output, config.metric_epsilon,
        config.user_diagonal));
  }
  return lin;
}

metric::LayerMetric assemble_layer_metric(const BatchLinearization& lin,
                                          const OptimizerConfig& config,
                                          int layer, int param_count) {
  metric::LayerMetric m;
  m.layer = layer;
  m.mass = linalg::DiagonalMatrix::uniform(param_count, layer_mass(config, layer));
  if (!config.pullback_enabled || lin.sample_jacobians.empty()) {
    m.scaled_jacobian = linalg::DenseMatrix(0, param_count);
    return m;
  }
  std::vector<linalg::DenseMatrix> jacobians;
  jacobians.reserve(lin.sample_jacobians.size());
  for (const auto& per_layer : lin.sample_jacobians)
    jacobians.push_back(per_layer[layer]);
  m.scaled_jacobian =
      metric::stacked_metric_jacobian(jacobians, lin.output_metrics, 0);
  return m;
}

void check_batch(const Network& net, std::span<const Sample> batch) {
  if (batch.empty()) throw DimensionMismatch("empty batch");
  for (const Sample& s : batch) {
    if (static_cast<int>(s.input.size()) != net.input_dim() ||
        static_cast<int>(s.target.size()) != net.output_dim())
      throw DimensionMismatch("sample dimensions do not match network");
  }
}

}  // namespace

double layer_mass(const OptimizerConfig& config, int layer) {
  if (!config.layer_masses.empty()) {
    if (layer < 0 || layer >= static_cast<int>(config.layer_masses.size()))
      throw DimensionMismatch("layer mass index out of range");
    return config.layer_masses[static_cast<std::size_t>(layer)];
  }
  return config.mass;
}

std::vector<metric::LayerMetric> layer_metrics(const Network& net,
                                               const ParameterState& params,
                                               std::span<const Sample> batch,
                                               const OptimizerConfig& config) {
  check_batch(net, batch);
  BatchLinearization lin;
  if (config.pullback_enabled)
    lin = linearize_batch(net, params, batch, config, config.metric_batch_cap);
  std::vector<metric::LayerMetric> out;
  out.reserve(static_cast<std::size_t>(net.num_layers()));
  for (int a = 0; a < net.num_layers(); ++a)
    out.push_back(assemble_layer_metric(lin, config, a, net.layer(a).param_count));
  return out;
}

BatchEvaluation batch_loss_gradient(const Network& net,
                                    const ParameterState& params,
                                    std::span<const Sample> batch,
                                    LossKind loss) {
  check_batch(net, batch);
  BatchEvaluation out;
  out.gradient.assign(static_cast<std::size_t>(net.total_params()), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (const Sample& s : batch) {
    const graph::Tape tape = graph::forward(net, params, s.input);
    const LossValue l = evaluate_loss(loss, tape.output, s.target);
    out.loss += l.value * inv_b;
    const Vector g = graph::parameter_gradient(net, params, tape, l.gradient);
    linalg::axpy(inv_b, g, out.gradient);
  }
  if (!std::isfinite(out.loss) || !linalg::all_finite(out.gradient))
    throw NonFinite("batch loss or gradient is not finite");
  return out;
}

StepResult riemannian_sgd_step(const Network& net, const ParameterState& params,
                               std::span<const Sample> batch,
                               const OptimizerConfig& config) {
  const auto start = Clock::now();
  check_batch(net, batch);
  StepResult result{params, {}};
  result.record.layer_update_norms.assign(
      static_cast<std::size_t>(net.num_layers()), 0.0);
  const double lr = config.learning_rate;

  if (!config.sequential_updates) {
    const BatchEvaluation eval =
        batch_loss_gradient(net, params, batch, config.loss);
    result.record.loss = eval.loss;
    BatchLinearization lin;
    if (config.pullback_enabled)
      lin = linearize_batch(net, params, batch, config, config.metric_batch_cap);
    for (int a = 0; a < net.num_layers(); ++a) {
      const graph::Layer& layer = net.layer(a);
      if (layer.param_count == 0) continue;
      const metric::LayerMetric m =
          assemble_layer_metric(lin, config, a, layer.param_count);
      const std::span<const double> g_block{
          eval.gradient.data() + layer.param_offset,
          static_cast<std::size_t>(layer.param_count)};
      const Vector delta = metric::riemannian_gradient(m, g_block);
      const std::span<double> w = result.params.block(a);
      double norm_sq = 0.0;
      for (int i = 0; i < layer.param_count; ++i) {
        const double step = lr * delta[static_cast<std::size_t>(i)];
        w[static_cast<std::size_t>(i)] -= step;
        norm_sq += step * step;
      }
      result.record.layer_update_norms[static_cast<std::size_t>(a)] =
          std::sqrt(norm_sq);
    }
  } else {
    // Last layer first, re-linearizing the batch after every layer update.
    double first_loss = 0.0;
    bool have_loss = false;
    for (int a = net.num_layers() - 1; a >= 0; --a) {
      const graph::Layer& layer = net.layer(a);
      const BatchEvaluation eval =
          batch_loss_gradient(net, result.params, batch, config.loss);
      if (!have_loss) {
        first_loss = eval.loss;
        have_loss = true;
      }
      if (layer.param_count == 0) continue;
      BatchLinearization lin;
      if (config.pullback_enabled)
        lin = linearize_batch(net, result.params, batch, config,
                              config.metric_batch_cap);
      const metric::LayerMetric m =
          assemble_layer_metric(lin, config, a, layer.param_count);
      const std::span<const double> g_block{
          eval.gradient.data() + layer.param_offset,
          static_cast<std::size_t>(layer.param_count)};
      const Vector delta = metric::riemannian_gradient(m, g_block);
      const std::span<double> w = result.params.block(a);
      double norm_sq = 0.0;
      for (int i = 0; i < layer.param_count; ++i) {
        const double step = lr * delta[static_cast<std::size_t>(i)];
        w[static_cast<std::size_t>(i)] -= step;
        norm_sq += step * step;
      }
      result.record.layer_update_norms[static_cast<std::size_t>(a)] =
          std::sqrt(norm_sq);
    }
    result.record.loss = first_loss;
  }

  if (!linalg::all_finite(result.params.flat()))
    throw NonFinite("parameters overflowed during the update");
  result.record.step_ms = elapsed_ms(start);
  return result;
}

StepResult sgd_baseline_step(const Network& net, const ParameterState& params,
                             std::span<const Sample> batch, double learning_rate,
                             LossKind loss) {
  const auto start = Clock::now();
  const BatchEvaluation eval = batch_loss_gradient(net, params, batch, loss);
  StepResult result{params, {}};
  result.record.loss = eval.loss;
  result.record.layer_update_norms.assign(
      static_cast<std::size_t>(net.num_layers()), 0.0);
  for (int a = 0; a < net.num_layers(); ++a) {
    const graph::Layer& layer = net.layer(a);
    if (layer.param_count == 0) continue;
    const std::span<double> w = result.params.block(a);
    double norm_sq = 0.0;
    for (int i = 0; i < layer.param_count; ++i) {
      const double step =
          learning_rate *
          eval.gradient[static_cast<std::size_t>(layer.param_offset) + i];
      w[static_cast<std::size_t>(i)] -= step;
      norm_sq += step * step;
    }
    result.record.layer_update_norms[static_cast<std::size_t>(a)] =
        std::sqrt(norm_sq);
  }
  if (!linalg::all_finite(result.params.flat()))
    throw NonFinite("parameters overflowed during the update");
  result.record.step_ms = elapsed_ms(start);
  return result;
}

}  // namespace riemann::opt
