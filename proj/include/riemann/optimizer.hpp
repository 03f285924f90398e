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

// Training steps: layerwise-metric preconditioned SGD and a plain SGD
// baseline.  One step evaluates the batch at the current parameters, builds
// the per-layer factored metrics, applies the inverse metric to each layer
// gradient and moves all layers at once (or one at a time in the sequential
// variant).

#ifndef RIEMANN_OPTIMIZER_HPP
#define RIEMANN_OPTIMIZER_HPP

#include <span>
#include <vector>

#include "riemann/loss.hpp"
#include "riemann/metric.hpp"
#include "riemann/module_graph.hpp"

namespace riemann::opt {

using graph::Network;
using graph::ParameterState;
using linalg::Vector;

struct Sample {
  Vector input;
  Vector target;
};

struct OptimizerConfig {
  double learning_rate = 1e-2;
  /// Mass for every layer; overridden per layer by layer_masses when set.
  double mass = 1.0;
  Vector layer_masses;
  LossKind loss = LossKind::kMeanSquaredError;
  metric::OutputMetricKind output_metric = metric::OutputMetricKind::kIdentity;
  double metric_epsilon = 1e-6;
  Vector user_diagonal;
  /// At most this many samples contribute rows to each layer's K; 0 keeps
  /// the whole batch.
  int metric_batch_cap = 0;
  /// With the pullback disabled every layer metric degenerates to its mass
  /// matrix (K has no rows).
  bool pullback_enabled = true;
  /// Update layers one at a time, last layer first, re-linearizing after
  /// each, instead of moving all layers simultaneously.
  bool sequential_updates = false;
};

struct TrainingRecord {
  int step = 0;
  double loss = 0.0;
  Vector layer_update_norms;
  double step_ms = 0.0;
};

/// Mean loss over the batch and its flat parameter gradient, one forward and
/// one reverse sweep per sample.  Throws NonFinite if either overflows.
struct BatchEvaluation {
  double loss = 0.0;
  Vector gradient;
};
BatchEvaluation batch_loss_gradient(const Network& net,
                                    const ParameterState& params,
                                    std::span<const Sample> batch,
                                    LossKind loss);

/// The per-layer mass value for a layer index under this config.
double layer_mass(const OptimizerConfig& config, int layer);

/// The factored metrics the preconditioned step uses at these parameters,
/// one entry per layer.  Layers without parameters get an empty block.
std::vector<metric::LayerMetric> layer_metrics(const Network& net,
                                               const ParameterState& params,
                                               std::span<const Sample> batch,
                                               const OptimizerConfig& config);

struct StepResult {
  ParameterState params;
  TrainingRecord record;
};

/// One preconditioned step.  Per layer a, with g the layer block of the
/// batch gradient, D = mass * I and K the stacked scaled Jacobian:
///   delta w = -lr * (D + K^T K)^{-1} g.
StepResult riemannian_sgd_step(const Network& net, const ParameterState& params,
                               std::span<const Sample> batch,
                               const OptimizerConfig& config);

/// Plain gradient step delta w = -lr * g on the same batch gradient path.
StepResult sgd_baseline_step(const Network& net, const ParameterState& params,
                             std::span<const Sample> batch, double learning_rate,
                             LossKind loss);

}  // namespace riemann::opt

#endif  // RIEMANN_OPTIMIZER_HPP
