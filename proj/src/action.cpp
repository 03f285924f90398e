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

#include "riemann/action.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "riemann/errors.hpp"
#include "riemann/metric.hpp"

namespace riemann::action {

namespace {

void check_finite(const Vector& v, const char* what) {
  if (!linalg::all_finite(v)) throw NonFinite(what);
}

Vector flow_rhs(const FlowProblem& problem, std::span<const double> position) {
  const Vector grad = problem.gradient(position);
  const DenseMatrix g_inv = problem.metric_inverse(position);
  Vector v = linalg::matvec(g_inv, grad);
  for (double& x : v) x *= -problem.eta;
  return v;
}

TrajectorySample make_sample(const FlowProblem& problem, double s,
                             Vector position, Vector velocity) {
  TrajectorySample sample;
  sample.s = s;
  sample.lagrangian = evaluate_lagrangian(problem, position, velocity);
  sample.potential = problem.value(position);
  const DenseMatrix g = problem.metric(position);
  HamiltonianState state;
  state.momentum = linalg::matvec(g, velocity);
  state.position = std::move(position);
  sample.hamiltonian = evaluate_hamiltonian(state, problem);
  sample.position = std::move(state.position);
  sample.velocity = std::move(velocity);
  return sample;
}

int step_count(double s_end, double step) {
  if (!(step > 0.0) || !(s_end > 0.0))
    throw DimensionMismatch("integration span and step must be positive");
  int steps = static_cast<int>(std::llround(s_end / step));
  if (steps < 1) steps = 1;
  // A short final substep absorbs any remainder.
  if (static_cast<double>(steps) * step + 1e-12 * s_end < s_end) ++steps;
  return steps;
}

}  // namespace

double evaluate_lagrangian(const FlowProblem& problem,
                           std::span<const double> position,
                           std::span<const double> velocity) {
  const DenseMatrix g = problem.metric(position);
  const Vector gv = linalg::matvec(g, velocity);
  double kinetic = 0.0;
  for (std::size_t i = 0; i < velocity.size(); ++i) kinetic += velocity[i] * gv[i];
  const Vector grad = problem.gradient(position);
  const DenseMatrix g_inv = problem.metric_inverse(position);
  const Vector gig = linalg::matvec(g_inv, grad);
  const double potential_term = linalg::dot(grad, gig);
  return 0.5 * (kinetic + problem.eta * problem.eta * potential_term);
}

double evaluate_hamiltonian(const HamiltonianState& state,
                            const FlowProblem& problem) {
  const Vector grad = problem.gradient(state.position);
  const std::size_t n = state.momentum.size();
  Vector minus(n), plus(n);
  for (std::size_t i = 0; i < n; ++i) {
    minus[i] = state.momentum[i] - problem.eta * grad[i];
    plus[i] = state.momentum[i] + problem.eta * grad[i];
  }
  const DenseMatrix g_inv = problem.metric_inverse(state.position);
  const Vector gi_plus = linalg::matvec(g_inv, plus);
  return 0.5 * linalg::dot(minus, gi_plus);
}

Trajectory integrate_gradient_flow(const FlowProblem& problem, Vector start,
                                   double s_end, double step) {
  const int steps = step_count(s_end, step);
  Trajectory out;
  out.step = step;
  out.samples.reserve(static_cast<std::size_t>(steps) + 1);
  Vector phi = std::move(start);
  double s = 0.0;
  for (int k = 0; k < steps; ++k) {
    const Vector k1 = flow_rhs(problem, phi);
    out.samples.push_back(make_sample(problem, s, phi, k1));
    const double h = (k + 1 == steps) ? (s_end - s) : step;
    Vector probe(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) probe[i] = phi[i] + 0.5 * h * k1[i];
    const Vector k2 = flow_rhs(problem, probe);
    for (std::size_t i = 0; i < phi.size(); ++i) probe[i] = phi[i] + 0.5 * h * k2[i];
    const Vector k3 = flow_rhs(problem, probe);
    for (std::size_t i = 0; i < phi.size(); ++i) probe[i] = phi[i] + h * k3[i];
    const Vector k4 = flow_rhs(problem, probe);
    for (std::size_t i = 0; i < phi.size(); ++i)
      phi[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    check_finite(phi, "gradient flow diverged");
    s += h;
  }
  out.samples.push_back(make_sample(problem, s, phi, flow_rhs(problem, phi)));
  return out;
}

namespace {

struct PhasePoint {
  Vector phi;
  Vector p;
};

PhasePoint hamilton_rhs(const FlowProblem& problem, const PhasePoint& state) {
  const std::size_t n = state.phi.size();
  PhasePoint rhs;
  const DenseMatrix g_inv = problem.metric_inverse(state.phi);
  rhs.phi = linalg::matvec(g_inv, state.p);
  const Vector grad = problem.gradient(state.phi);
  const DenseMatrix hess = problem.hessian(state.phi);
  const Vector gig = linalg::matvec(g_inv, grad);
  rhs.p.assign(n, 0.0);
  const double eta2 = problem.eta * problem.eta;
  // eta^2 g^{KL} (d_I d_K h) d_L h  ==  eta^2 Hess (g^{-1} grad)
  const Vector curvature_term = linalg::matvec(hess, gig);
  for (std::size_t i = 0; i < n; ++i) rhs.p[i] = eta2 * curvature_term[i];
  if (!problem.constant_metric()) {
    const std::vector<DenseMatrix> dg = problem.metric_inverse_derivatives(state.phi);
    for (std::size_t i = 0; i < n; ++i) {
      const DenseMatrix& d = dg[i];
      const Vector dp = linalg::matvec(d, state.p);
      const Vector dgrad = linalg::matvec(d, grad);
      rhs.p[i] += -0.5 * linalg::dot(state.p, dp) +
                  0.5 * eta2 * linalg::dot(grad, dgrad);
    }
  }
  return rhs;
}

}  // namespace

Trajectory integrate_hamilton_equations(const FlowProblem& problem,
                                        HamiltonianState start, double s_end,
                                        double step) {
  const int steps = step_count(s_end, step);
  Trajectory out;
  out.step = step;
  out.samples.reserve(static_cast<std::size_t>(steps) + 1);
  PhasePoint state{std::move(start.position), std::move(start.momentum)};
  const std::size_t n = state.phi.size();
  double s = 0.0;
  const auto record = [&](double at) {
    const DenseMatrix g_inv = problem.metric_inverse(state.phi);
    Vector velocity = linalg::matvec(g_inv, state.p);
    TrajectorySample sample;
    sample.s = at;
    sample.lagrangian = evaluate_lagrangian(problem, state.phi, velocity);
    sample.potential = problem.value(state.phi);
    sample.hamiltonian =
        evaluate_hamiltonian({state.phi, state.p}, problem);
    sample.position = state.phi;
    sample.velocity = std::move(velocity);
    out.samples.push_back(std::move(sample));
  };
  for (int k = 0; k < steps; ++k) {
    record(s);
    const double h = (k + 1 == steps) ? (s_end - s) : step;
    const PhasePoint k1 = hamilton_rhs(problem, state);
    PhasePoint probe{Vector(n), Vector(n)};
    for (std::size_t i = 0; i < n; ++i) {
      probe.phi[i] = state.phi[i] + 0.5 * h * k1.phi[i];
      probe.p[i] = state.p[i] + 0.5 * h * k1.p[i];
    }
    const PhasePoint k2 = hamilton_rhs(problem, probe);
    for (std::size_t i = 0; i < n; ++i) {
      probe.phi[i] = state.phi[i] + 0.5 * h * k2.phi[i];
      probe.p[i] = state.p[i] + 0.5 * h * k2.p[i];
    }
    const PhasePoint k3 = hamilton_rhs(problem, probe);
    for (std::size_t i = 0; i < n; ++i) {
      probe.phi[i] = state.phi[i] + h * k3.phi[i];
      probe.p[i] = state.p[i] + h * k3.p[i];
    }
    const PhasePoint k4 = hamilton_rhs(problem, probe);
    for (std::size_t i = 0; i < n; ++i) {
      state.phi[i] += h / 6.0 * (k1.phi[i] + 2.0 * k2.phi[i] + 2.0 * k3.phi[i] + k4.phi[i]);
      state.p[i] += h / 6.0 * (k1.p[i] + 2.0 * k2.p[i] + 2.0 * k3.p[i] + k4.p[i]);
    }
    check_finite(state.phi, "hamilton flow diverged");
    check_finite(state.p, "hamilton flow diverged");
    s += h;
  }
  record(s);
  return out;
}

Trajectory trajectory_from_positions(const FlowProblem& problem,
                                     const std::vector<double>& s,
                                     const std::vector<Vector>& positions) {
  if (s.size() != positions.size() || s.size() < 3)
    throw DimensionMismatch("trajectory needs at least three aligned samples");
  const std::size_t count = s.size();
  const std::size_t n = positions.front().size();
  Trajectory out;
  out.step = s[1] - s[0];
  out.samples.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Vector v(n);
    if (k == 0) {
      // Second-order one-sided difference.
      const double h1 = s[1] - s[0], h2 = s[2] - s[0];
      for (std::size_t i = 0; i < n; ++i)
        v[i] = (-(h2 * h2 - h1 * h1) * positions[0][i] + h2 * h2 * positions[1][i] -
                h1 * h1 * positions[2][i]) /
               (h1 * h2 * (h2 - h1));
    } else if (k + 1 == count) {
      const double h1 = s[count - 1] - s[count - 2];
      const double h2 = s[count - 1] - s[count - 3];
      for (std::size_t i = 0; i < n; ++i)
        v[i] = ((h2 * h2 - h1 * h1) * positions[count - 1][i] -
                h2 * h2 * positions[count - 2][i] +
                h1 * h1 * positions[count - 3][i]) /
               (h1 * h2 * (h2 - h1));
    } else {
      const double span = s[k + 1] - s[k - 1];
      for (std::size_t i = 0; i < n; ++i)
        v[i] = (positions[k + 1][i] - positions[k - 1][i]) / span;
    }
    out.samples.push_back(make_sample(problem, s[k], positions[k], std::move(v)));
  }
  return out;
}

double evaluate_action(const Trajectory& trajectory, const FlowProblem& problem) {
  if (trajectory.samples.size() < 2)
    throw DimensionMismatch("action needs at least two samples");
  double total = 0.0;
  double prev_l = evaluate_lagrangian(problem, trajectory.samples[0].position,
                                      trajectory.samples[0].velocity);
  for (std::size_t k = 1; k < trajectory.samples.size(); ++k) {
    const double l = evaluate_lagrangian(problem, trajectory.samples[k].position,
                                         trajectory.samples[k].velocity);
    total += 0.5 * (prev_l + l) *
             (trajectory.samples[k].s - trajectory.samples[k - 1].s);
    prev_l = l;
  }
  return total;
}

double quadrature_tolerance(const Trajectory& trajectory,
                            const FlowProblem& problem) {
  const std::size_t count = trajectory.samples.size();
  if (count < 3) return 1e-12;
  Vector l(count);
  for (std::size_t k = 0; k < count; ++k)
    l[k] = evaluate_lagrangian(problem, trajectory.samples[k].position,
                               trajectory.samples[k].velocity);
  // Trapezoid error per panel is |L''| ds^3 / 12; the second difference of
  // L already carries the ds^2 factor.
  double tol = 0.0;
  for (std::size_t k = 1; k + 1 < count; ++k) {
    const double ds = 0.5 * (trajectory.samples[k + 1].s -
                             trajectory.samples[k - 1].s);
    tol += std::abs(l[k - 1] - 2.0 * l[k] + l[k + 1]) * ds / 12.0;
  }
  // Floor keeps the bound meaningful when L'' vanishes identically.
  return tol + 1e-12 * (1.0 + std::abs(l[0]));
}

Vector hamiltonian_residuals(const Trajectory& trajectory,
                             const FlowProblem& problem) {
  const std::size_t count = trajectory.samples.size();
  if (count < 3) throw DimensionMismatch("need at least three samples");
  Vector residuals;
  residuals.reserve(count - 2);
  const std::size_t n = trajectory.samples.front().position.size();
  for (std::size_t k = 1; k + 1 < count; ++k) {
    const auto& prev = trajectory.samples[k - 1];
    const auto& here = trajectory.samples[k];
    const auto& next = trajectory.samples[k + 1];
    Vector v(n);
    const double span = next.s - prev.s;
    for (std::size_t i = 0; i < n; ++i)
      v[i] = (next.position[i] - prev.position[i]) / span;
    const DenseMatrix g = problem.metric(here.position);
    HamiltonianState state;
    state.position = here.position;
    state.momentum = linalg::matvec(g, v);
    residuals.push_back(std::abs(evaluate_hamiltonian(state, problem)));
  }
  return residuals;
}

double discrete_action_stationarity(const Trajectory& trajectory,
                                    const FlowProblem& problem, int stride) {
  const std::size_t count = trajectory.samples.size();
  if (count < 3) throw DimensionMismatch("need at least three samples");
  if (stride < 1) stride = 1;
  const std::size_t n = trajectory.samples.front().position.size();
  // Midpoint-rule contribution of the panel [k, k+1]; only the two panels
  // touching a point depend on it.
  const auto panel = [&](const Vector& a, const Vector& b, double ds) {
    Vector mid(n), vel(n);
    for (std::size_t i = 0; i < n; ++i) {
      mid[i] = 0.5 * (a[i] + b[i]);
      vel[i] = (b[i] - a[i]) / ds;
    }
    return evaluate_lagrangian(problem, mid, vel) * ds;
  };
  double sup = 0.0;
  for (std::size_t k = 1; k + 1 < count; k += static_cast<std::size_t>(stride)) {
    const Vector& left = trajectory.samples[k - 1].position;
    const Vector& right = trajectory.samples[k + 1].position;
    const double ds_l = trajectory.samples[k].s - trajectory.samples[k - 1].s;
    const double ds_r = trajectory.samples[k + 1].s - trajectory.samples[k].s;
    Vector point = trajectory.samples[k].position;
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = point[i];
      const double fd = 1e-6;
      point[i] = saved + fd;
      const double up = panel(left, point, ds_l) + panel(point, right, ds_r);
      point[i] = saved - fd;
      const double down = panel(left, point, ds_l) + panel(point, right, ds_r);
      point[i] = saved;
      sup = std::max(sup, std::abs(up - down) / (2.0 * fd));
    }
  }
  return sup;
}

FlowProblem quadratic_problem(DenseMatrix curvature, DenseMatrix metric,
                              double eta) {
  const int n = curvature.rows();
  if (curvature.cols() != n || metric.rows() != n || metric.cols() != n)
    throw DimensionMismatch("quadratic_problem: shape mismatch");
  auto q = std::make_shared<DenseMatrix>(std::move(curvature));
  auto g = std::make_shared<DenseMatrix>(std::move(metric));
  const auto factor = linalg::cholesky_upper(*g);
  auto g_inv = std::make_shared<DenseMatrix>(n, n);
  for (int col = 0; col < n; ++col) {
    Vector e(static_cast<std::size_t>(n), 0.0);
    e[static_cast<std::size_t>(col)] = 1.0;
    const Vector column = linalg::solve_cholesky(factor, e);
    for (int r = 0; r < n; ++r) (*g_inv)(r, col) = column[static_cast<std::size_t>(r)];
  }
  FlowProblem problem;
  problem.dim = n;
  problem.eta = eta;
  problem.value = [q](std::span<const double> phi) {
    const Vector qphi = linalg::matvec(*q, phi);
    double acc = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) acc += phi[i] * qphi[i];
    return 0.5 * acc;
  };
  problem.gradient = [q](std::span<const double> phi) {
    return linalg::matvec(*q, phi);
  };
  problem.metric = [g](std::span<const double>) { return *g; };
  problem.metric_inverse = [g_inv](std::span<const double>) { return *g_inv; };
  problem.hessian = [q](std::span<const double>) { return *q; };
  return problem;
}

FlowProblem neural_flow_problem(const graph::Network& net,
                                std::vector<opt::Sample> batch,
                                const opt::OptimizerConfig& config) {
  if (net.total_params() > 200)
    throw DimensionMismatch(
        "neural flow problems materialize the dense metric; use <= 200 "
        "parameters");
  auto shared_net = std::make_shared<graph::Network>(net);
  auto shared_batch = std::make_shared<std::vector<opt::Sample>>(std::move(batch));
  auto shared_config = std::make_shared<opt::OptimizerConfig>(config);
  const int n = net.total_params();

  const auto with_params = [shared_net](std::span<const double> phi) {
    graph::ParameterState params(*shared_net);
    params.flat().assign(phi.begin(), phi.end());
    return params;
  };

  FlowProblem problem;
  problem.dim = n;
  problem.eta = config.learning_rate;

  problem.value = [=](std::span<const double> phi) {
    const graph::ParameterState params = with_params(phi);
    return opt::batch_loss_gradient(*shared_net, params, *shared_batch,
                                    shared_config->loss)
        .loss;
  };
  problem.gradient = [=](std::span<const double> phi) {
    const graph::ParameterState params = with_params(phi);
    return opt::batch_loss_gradient(*shared_net, params, *shared_batch,
                                    shared_config->loss)
        .gradient;
  };

  const auto dense_metric = [=](std::span<const double> phi) {
    const graph::ParameterState params = with_params(phi);
    DenseMatrix g(n, n);
    // Mass part.
    for (int a = 0; a < shared_net->num_layers(); ++a) {
      const graph::Layer& layer = shared_net->layer(a);
      const double mu = opt::layer_mass(*shared_config, a);
      for (int i = 0; i < layer.param_count; ++i)
        g(layer.param_offset + i, layer.param_offset + i) = mu;
    }
    if (!shared_config->pullback_enabled) return g;
    // Batch-averaged pullback blocks.
    const double inv_b = 1.0 / static_cast<double>(shared_batch->size());
    for (const opt::Sample& sample : *shared_batch) {
      const graph::Tape tape = graph::forward(*shared_net, params, sample.input);
      const auto jacobians = graph::all_layer_jacobians(*shared_net, params, tape);
      const metric::OutputMetric om = metric::build_output_metric(
          shared_config->output_metric, tape.output,
          shared_config->metric_epsilon, shared_config->user_diagonal);
      const DenseMatrix m = linalg::gram(om.factor.matrix());
      for (int a = 0; a < shared_net->num_layers(); ++a) {
        const graph::Layer& layer = shared_net->layer(a);
        if (layer.param_count == 0) continue;
        const DenseMatrix mj = linalg::matmul(m, jacobians[a]);
        const DenseMatrix block =
            linalg::matmul(linalg::transpose(jacobians[a]), mj);
        for (int r = 0; r < layer.param_count; ++r)
          for (int c = 0; c < layer.param_count; ++c)
            g(layer.param_offset + r, layer.param_offset + c) +=
                inv_b * block(r, c);
      }
    }
    return g;
  };
  problem.metric = dense_metric;
  problem.metric_inverse = [=](std::span<const double> phi) {
    const DenseMatrix g = dense_metric(phi);
    const auto factor = linalg::cholesky_upper(g);
    DenseMatrix inv(n, n);
    for (int col = 0; col < n; ++col) {
      Vector e(static_cast<std::size_t>(n), 0.0);
      e[static_cast<std::size_t>(col)] = 1.0;
      const Vector column = linalg::solve_cholesky(factor, e);
      for (int r = 0; r < n; ++r)
        inv(r, col) = column[static_cast<std::size_t>(r)];
    }
    return inv;
  };
  problem.hessian = [=](std::span<const double> phi) {
    // Central differences of the analytic gradient, step 1e-5, then
    // symmetrized.
    const double step = 1e-5;
    DenseMatrix h(n, n);
    Vector probe(phi.begin(), phi.end());
    for (int c = 0; c < n; ++c) {
      const double saved = probe[static_cast<std::size_t>(c)];
      probe[static_cast<std::size_t>(c)] = saved + step;
      const Vector up = problem.gradient(probe);
      probe[static_cast<std::size_t>(c)] = saved - step;
      const Vector down = problem.gradient(probe);
      probe[static_cast<std::size_t>(c)] = saved;
      for (int r = 0; r < n; ++r)
        h(r, c) = (up[static_cast<std::size_t>(r)] -
                   down[static_cast<std::size_t>(r)]) /
                  (2.0 * step);
    }
    return linalg::symmetrized(h);
  };
  problem.metric_inverse_derivatives = [=](std::span<const double> phi) {
    const double step = 1e-5;
    std::vector<DenseMatrix> out;
    out.reserve(static_cast<std::size_t>(n));
    Vector probe(phi.begin(), phi.end());
    for (int i = 0; i < n; ++i) {
      const double saved = probe[static_cast<std::size_t>(i)];
      probe[static_cast<std::size_t>(i)] = saved + step;
      const DenseMatrix up = problem.metric_inverse(probe);
      probe[static_cast<std::size_t>(i)] = saved - step;
      const DenseMatrix down = problem.metric_inverse(probe);
      probe[static_cast<std::size_t>(i)] = saved;
      DenseMatrix d(n, n);
      for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) d(r, c) = (up(r, c) - down(r, c)) / (2.0 * step);
      out.push_back(std::move(d));
    }
    return out;
  };
  return problem;
}

}  // namespace riemann::action
