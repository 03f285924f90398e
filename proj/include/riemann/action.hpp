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

// Desk-scale lab for the variational side of the optimizer: integrates
// gradient flow and the corresponding Hamilton equations on small problems,
// evaluates the path action
//   S = 1/2 integral ( g_IJ v^I v^J + eta^2 g^IJ d_I h d_J h ) ds
// and the factored Hamiltonian
//   H = 1/2 g^IJ (p_I - eta d_I h)(p_J + eta d_J h),
// which vanishes along gradient descent/ascent paths and whose sign-split
// factors avoid cancellation near them.

#ifndef RIEMANN_ACTION_HPP
#define RIEMANN_ACTION_HPP

#include <functional>
#include <span>
#include <vector>

#include "riemann/linalg.hpp"
#include "riemann/optimizer.hpp"

namespace riemann::action {

using linalg::DenseMatrix;
using linalg::Vector;

/// A flow problem bundles the potential h, the metric g and the step weight
/// eta.  All maps take the flat position vector.  metric_inverse_derivatives
/// returns, for each coordinate I, the matrix d g^{KL} / d phi^I of the
/// inverse metric; leave it empty for position-independent metrics.
struct FlowProblem {
  int dim = 0;
  double eta = 1.0;
  std::function<double(std::span<const double>)> value;
  std::function<Vector(std::span<const double>)> gradient;
  std::function<DenseMatrix(std::span<const double>)> metric;
  std::function<DenseMatrix(std::span<const double>)> metric_inverse;
  std::function<DenseMatrix(std::span<const double>)> hessian;
  std::function<std::vector<DenseMatrix>(std::span<const double>)>
      metric_inverse_derivatives;

  bool constant_metric() const { return !metric_inverse_derivatives; }
};

/// h = 1/2 phi^T Q phi with constant metric g; analytic derivatives filled
/// in, including the (zero) inverse-metric derivatives treated as constant.
FlowProblem quadratic_problem(DenseMatrix curvature, DenseMatrix metric,
                              double eta);

/// Wraps a network + batch as a flow problem on parameter space: h is the
/// batch mean loss, g the block-diagonal layerwise metric materialized
/// densely (total params <= 200, small enough to invert directly).  The
/// Hessian of h and the metric derivatives fall back to central finite
/// differences with step 1e-5.
FlowProblem neural_flow_problem(const graph::Network& net,
                                std::vector<opt::Sample> batch,
                                const opt::OptimizerConfig& config);

struct TrajectorySample {
  double s = 0.0;
  Vector position;
  Vector velocity;
  double lagrangian = 0.0;
  double hamiltonian = 0.0;
  double potential = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  double step = 0.0;
};

struct HamiltonianState {
  Vector position;
  Vector momentum;
};

double evaluate_lagrangian(const FlowProblem& problem,
                           std::span<const double> position,
                           std::span<const double> velocity);

double evaluate_hamiltonian(const HamiltonianState& state,
                            const FlowProblem& problem);

/// RK4 on the descent flow v = -eta g^{-1} grad h.  Samples are recorded on
/// the uniform grid; the stored velocity is the flow right-hand side at the
/// sample position.
Trajectory integrate_gradient_flow(const FlowProblem& problem, Vector start,
                                   double s_end, double step);

/// RK4 on phase space: v^I = g^{IJ} p_J and
///   dp_I/ds = -1/2 (d_I g^{KL}) p_K p_L + eta^2/2 (d_I g^{KL}) d_K h d_L h
///             + eta^2 g^{KL} (d_I d_K h) d_L h.
/// Constant metrics skip the derivative terms.
Trajectory integrate_hamilton_equations(const FlowProblem& problem,
                                        HamiltonianState start, double s_end,
                                        double step);

/// Rebuilds a trajectory from bare positions: velocities by central
/// differences (second-order one-sided at the ends), then per-sample
/// Lagrangian/Hamiltonian/potential from the problem.
Trajectory trajectory_from_positions(const FlowProblem& problem,
                                     const std::vector<double>& s,
                                     const std::vector<Vector>& positions);

/// Trapezoidal quadrature of the Lagrangian along the trajectory, recomputed
/// from the stored positions and velocities.
double evaluate_action(const Trajectory& trajectory, const FlowProblem& problem);

/// Error envelope of the trapezoidal rule, estimated from second differences
/// of the integrand: sum |L''| ds^3 / 12 over interior samples.
double quadrature_tolerance(const Trajectory& trajectory,
                            const FlowProblem& problem);

/// |H| per interior sample with the momentum reconstructed from
/// central-difference velocities of the stored positions.  This measures
/// whether the positions trace a gradient path, independent of the stored
/// velocities.
Vector hamiltonian_residuals(const Trajectory& trajectory,
                             const FlowProblem& problem);

/// Sup-norm of the discrete action gradient with respect to each checked
/// interior sample position (midpoint-rule discretization, central finite
/// differences).  Near zero iff the trajectory is discretely stationary.
double discrete_action_stationarity(const Trajectory& trajectory,
                                    const FlowProblem& problem,
                                    int stride = 1);

}  // namespace riemann::action

#endif  // RIEMANN_ACTION_HPP
