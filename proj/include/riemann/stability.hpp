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

// Algorithmic stability experiment: train two copies of a network in
// lockstep on datasets that differ in a single sample, estimate the
// contraction constants of the output dynamics, and compare the observed
// late-time output divergence against the bound
//   sup_i |y_i - y'_i| <= 2 kappa^2 L / (xi sqrt(n) mu).

#ifndef RIEMANN_STABILITY_HPP
#define RIEMANN_STABILITY_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "riemann/linalg.hpp"
#include "riemann/module_graph.hpp"
#include "riemann/optimizer.hpp"

namespace riemann::stability {

using graph::Network;
using graph::ParameterState;
using linalg::DenseMatrix;
using linalg::Vector;

/// A dataset plus a one-sample replacement.  The variant dataset is derived,
/// never stored, so the two can only differ at the replaced index.
struct PairedDatasets {
  std::vector<opt::Sample> base;
  std::size_t replaced_index = 0;
  opt::Sample replacement;

  /// The base dataset with the sample at replaced_index swapped out.
  /// Throws DimensionMismatch when the index is out of range.
  std::vector<opt::Sample> variant() const;
};

/// Empirical contraction constants of one paired run.
///   kappa: largest per-sample parameter Jacobian spectral norm seen.
///   loss_lipschitz: largest per-sample loss gradient norm seen.
///   xi: smallest sampled eigenvalue floor of the kernel matrix.
///   mu: smallest mass entry across layers.
/// The constants describe the realized trajectories, not all of weight
/// space; the bounds below are valid on that domain.
struct StabilityConstants {
  double kappa = 0.0;
  double loss_lipschitz = 0.0;
  double xi = 0.0;
  double mu = 0.0;
  std::size_t samples = 0;

  /// Late-time output divergence bound 2 kappa^2 L / (xi sqrt(n) mu).
  double divergence_bound() const;
  /// Per-sample disturbance bound 2 kappa^2 L / (n mu).
  double disturbance_bound() const;
  /// Stacked disturbance bound 2 kappa^2 L / (sqrt(n) mu).
  double stacked_disturbance_bound() const;
};

/// Raw observations collected along a run, reduced by estimate_constants.
struct RunArtifacts {
  std::vector<double> jacobian_norms;
  std::vector<double> loss_gradient_norms;
  std::vector<double> spectrum_minima;
  double min_mass = 0.0;
  std::size_t sample_count = 0;
};

/// Reduces artifacts to constants.  Throws RankDeficient when any sampled
/// kernel eigenvalue floor is at or below rank_tolerance, DimensionMismatch
/// when a field is empty, NotPositiveDefinite when the mass is not positive.
StabilityConstants estimate_constants(const RunArtifacts& artifacts,
                                      double rank_tolerance = 1e-10);

/// Kernel matrix of the output dynamics,
///   H = (1/n) grad^T ybar G^{-1} grad ybar,
/// with G the block diagonal per-layer training metric at these parameters
/// and grad ybar the stacked per-sample output Jacobians.  Symmetric PSD,
/// and positive definite exactly when the stacked Jacobian has full column
/// rank.  Throws DimensionMismatch when n * output_dim exceeds 512.
DenseMatrix ntk_matrix(const Network& net, const ParameterState& params,
                       std::span<const opt::Sample> dataset,
                       const opt::OptimizerConfig& config);

/// The forcing the replacement injects into the output dynamics at the
/// primed parameters: for every sample i,
///   d_i = (1/n) J_i G^{-1} [grad l(replacement) - grad l(displaced sample)],
/// with J_i the output Jacobian at the base input x_i and both loss
/// gradients taken at the primed parameters.
std::vector<Vector> replacement_disturbance(const Network& net,
                                            const ParameterState& primed,
                                            const PairedDatasets& paired,
                                            const opt::OptimizerConfig& config);

struct StabilityConfig {
  opt::OptimizerConfig optimizer;
  /// Euler steps per run; continuous time advances learning_rate per step.
  int steps = 0;
  /// Kernel spectrum and Jacobian norms are sampled every this many steps.
  int spectrum_interval = 10;
  /// Eigenvalue floor below which the full-rank hypothesis is rejected.
  double rank_tolerance = 1e-10;
};

/// Per-step observations, taken before the step's parameter update.
struct StepDiagnostics {
  int step = 0;
  double time = 0.0;
  double divergence = 0.0;
  double max_disturbance = 0.0;
  double stacked_disturbance = 0.0;
};

struct SpectrumSample {
  int step = 0;
  double time = 0.0;
  double lambda_min = 0.0;
};

struct StabilityReport {
  StabilityConstants constants;
  /// Exponential transients of rate xi are declared over at 5 / xi.
  double transient_horizon = 0.0;
  /// sup over samples and recorded times past the horizon of |y_i - y'_i|.
  double observed_divergence = 0.0;
  /// learning_rate * kappa^2 / mu; small values indicate the discrete run
  /// tracks the continuous flow.
  double flow_step_ratio = 0.0;
  std::vector<StepDiagnostics> history;
  std::vector<SpectrumSample> spectra;
};

/// Trains the base and variant datasets in lockstep from one initialization
/// and assembles the report.  Throws RankDeficient as soon as a sampled
/// kernel spectrum violates the eigenvalue floor and ConfigInvalid when the
/// run ends before the transient horizon.
StabilityReport paired_training(const Network& net, const ParameterState& init,
                                const PairedDatasets& paired,
                                const StabilityConfig& config);

/// Pointwise disturbance bound check over a recorded run.
struct BoundCheck {
  bool passed = false;
  /// Smallest slack of the per-sample bound across recorded steps.
  double step_margin = 0.0;
  /// Smallest slack of the stacked bound across recorded steps.
  double stacked_margin = 0.0;
};

BoundCheck disturbance_bound_check(const StabilityReport& report,
                                   const StabilityConstants& constants);

}  // namespace riemann::stability

#endif  // RIEMANN_STABILITY_HPP
