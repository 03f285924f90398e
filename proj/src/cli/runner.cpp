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

#include "riemann/cli/runner.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "riemann/action.hpp"
#include "riemann/cli/artifacts.hpp"
#include "riemann/cli/dataset.hpp"
#include "riemann/errors.hpp"
#include "riemann/linalg.hpp"
#include "riemann/log.hpp"
#include "riemann/metric.hpp"
#include "riemann/module_graph.hpp"
#include "riemann/optimizer.hpp"
#include "riemann/rng.hpp"
#include "riemann/stability.hpp"

namespace riemann::cli {
namespace {

using linalg::DenseMatrix;
using linalg::DiagonalMatrix;
using linalg::Vector;
using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------
// Config readers shared by the runners
// ---------------------------------------------------------------------------

struct RunPaths {
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

RunPaths read_common(ConfigMap& config) {
  RunPaths paths;
  paths.seed = config.get_u64("seed", 0);
  paths.out = std::filesystem::path(config.get_string("out"));
  return paths;
}

void ensure_out_dir(const std::filesystem::path& out) {
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec)
    throw IoFailure("cannot create output directory " + out.string() + ": " +
                    ec.message());
}

opt::OptimizerConfig optimizer_from_config(ConfigMap& config) {
  opt::OptimizerConfig oc;
  oc.learning_rate = config.get_double("optimizer.learning_rate", oc.learning_rate);
  if (oc.learning_rate <= 0.0)
    throw ConfigInvalid("optimizer.learning_rate must be positive");
  oc.mass = config.get_double("optimizer.mass", oc.mass);
  if (oc.mass <= 0.0) throw ConfigInvalid("optimizer.mass must be positive");
  if (config.contains("optimizer.layer_masses")) {
    for (double m : config.get_double_list("optimizer.layer_masses")) {
      if (m <= 0.0) throw ConfigInvalid("optimizer.layer_masses must be positive");
      oc.layer_masses.push_back(m);
    }
  }
  const std::string loss = config.get_string("optimizer.loss", "mse");
  if (loss == "mse") {
    oc.loss = opt::LossKind::kMeanSquaredError;
  } else if (loss == "softmax_ce") {
    oc.loss = opt::LossKind::kSoftmaxCrossEntropy;
  } else {
    throw ConfigInvalid("optimizer.loss: unknown loss '" + loss + "'");
  }
  const std::string om = config.get_string("optimizer.output_metric", "identity");
  if (om == "identity") {
    oc.output_metric = metric::OutputMetricKind::kIdentity;
  } else if (om == "gauss_newton_softmax_ce") {
    oc.output_metric = metric::OutputMetricKind::kGaussNewtonSoftmaxCE;
  } else if (om == "user_diagonal") {
    oc.output_metric = metric::OutputMetricKind::kUserDiagonal;
    for (double d : config.get_double_list("optimizer.user_diagonal")) {
      if (d < 0.0) throw ConfigInvalid("optimizer.user_diagonal must be non-negative");
      oc.user_diagonal.push_back(d);
    }
  } else {
    throw ConfigInvalid("optimizer.output_metric: unknown kind '" + om + "'");
  }
  oc.metric_epsilon = config.get_double("optimizer.metric_epsilon", oc.metric_epsilon);
  if (oc.metric_epsilon < 0.0)
    throw ConfigInvalid("optimizer.metric_epsilon must be non-negative");
  oc.metric_batch_cap =
      static_cast<int>(config.get_int("optimizer.metric_batch_cap", 0));
  if (oc.metric_batch_cap < 0)
    throw ConfigInvalid("optimizer.metric_batch_cap must be non-negative");
  oc.pullback_enabled = config.get_bool("optimizer.pullback", true);
  oc.sequential_updates = config.get_bool("optimizer.sequential", false);
  return oc;
}

graph::Network network_from_config(ConfigMap& config) {
  const int input_dim = static_cast<int>(config.get_int("model.input_dim"));
  const std::string layers = config.get_string("model.layers");
  return graph::Network(parse_model_layers(layers, input_dim));
}

void check_model_dims(const graph::Network& net, const DatasetSource& source) {
  if (net.input_dim() != source.input_dim)
    throw ConfigInvalid("model.input_dim " + std::to_string(net.input_dim()) +
                        " does not match dataset.input_dim " +
                        std::to_string(source.input_dim));
  if (net.output_dim() != source.output_dim)
    throw ConfigInvalid("model output width " + std::to_string(net.output_dim()) +
                        " does not match dataset.output_dim " +
                        std::to_string(source.output_dim));
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

std::string training_csv(const ConfigMap& config,
                         const std::vector<opt::TrainingRecord>& records,
                         int num_layers) {
  std::string text = resolved_header(config);
  text += "step,loss";
  for (int a = 0; a < num_layers; ++a) text += ",update_norm_" + std::to_string(a);
  text += "\n";
  for (const opt::TrainingRecord& r : records) {
    text += std::to_string(r.step) + "," + format_float(r.loss);
    for (double norm : r.layer_update_norms) text += "," + format_float(norm);
    text += "\n";
  }
  return text;
}

std::string timings_csv(const ConfigMap& config,
                        const std::vector<opt::TrainingRecord>& records) {
  std::string text = resolved_header(config);
  text += "step,step_ms\n";
  for (const opt::TrainingRecord& r : records)
    text += std::to_string(r.step) + "," + format_float(r.step_ms) + "\n";
  return text;
}

std::string params_blob(const ConfigMap& config, const graph::Network& net,
                        const graph::ParameterState& params) {
  std::string text = resolved_header(config);
  for (int a = 0; a < net.num_layers(); ++a) {
    const int count = net.layer(a).param_count;
    if (count == 0) continue;
    text += "layer " + std::to_string(a) + " " + std::to_string(count) + "\n";
    for (double w : params.block(a)) text += format_float(w) + "\n";
  }
  return text;
}

int run_train(ConfigMap& config) {
  const RunPaths paths = read_common(config);
  graph::Network net = network_from_config(config);
  const DatasetSource source = dataset_from_config(config);
  const opt::OptimizerConfig oc = optimizer_from_config(config);
  const int steps = static_cast<int>(config.get_int("train.steps"));
  if (steps < 1) throw ConfigInvalid("train.steps must be at least 1");
  config.reject_unread();
  check_model_dims(net, source);

  SplitMix64 root(paths.seed);
  SplitMix64 data_rng = root.split();
  SplitMix64 init_rng = root.split();
  const std::vector<opt::Sample> samples = load_dataset(source, data_rng);
  graph::ParameterState params = graph::ParameterState::random_init(net, init_rng);

  std::vector<opt::TrainingRecord> records;
  records.reserve(steps);
  std::string overflow;
  for (int s = 0; s < steps; ++s) {
    try {
      opt::StepResult result = opt::riemannian_sgd_step(net, params, samples, oc);
      result.record.step = s;
      records.push_back(std::move(result.record));
      params = std::move(result.params);
    } catch (const NonFinite& e) {
      overflow = e.what();
      break;
    }
  }

  ensure_out_dir(paths.out);
  atomic_write_text(paths.out / "training.csv",
                    training_csv(config, records, net.num_layers()));
  atomic_write_text(paths.out / "timings.csv", timings_csv(config, records));
  atomic_write_text(paths.out / "final_params.txt", params_blob(config, net, params));
  if (!overflow.empty())
    throw NonFinite(overflow + " (artifacts hold the last finite step)");
  log::info("train: " + std::to_string(records.size()) + " steps, loss " +
            format_float(records.front().loss) + " -> " +
            format_float(records.back().loss));
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct SuiteResult {
  bool passed = false;
  std::string line;
};

std::string suite_line(const SuiteResult& result) {
  return std::string(result.passed ? "PASS " : "FAIL ") + result.line + "\n";
}

/// Product of random Givens rotations over every coordinate pair; an
/// orthogonal matrix without needing a QR factorization.
DenseMatrix random_rotation(int n, SplitMix64& rng) {
  DenseMatrix q = DenseMatrix::identity(n);
  for (int sweep = 0; sweep < 2; ++sweep) {
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        for (int r = 0; r < n; ++r) {
          const double qi = q(r, i);
          const double qj = q(r, j);
          q(r, i) = c * qi - s * qj;
          q(r, j) = s * qi + c * qj;
        }
      }
    }
  }
  return q;
}

/// SPD matrix with eigenvalues uniform in [lo, hi] under a random rotation.
/// The controlled spectrum keeps flow rates moderate, which the residual
/// tolerances of the verification suites assume.
DenseMatrix random_spd(int n, double lo, double hi, SplitMix64& rng) {
  const DenseMatrix q = random_rotation(n, rng);
  Vector eigen(n);
  for (double& v : eigen) v = rng.uniform(lo, hi);
  DenseMatrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double sum = 0.0;
      for (int k = 0; k < n; ++k) sum += eigen[k] * q(i, k) * q(j, k);
      m(i, j) = sum;
    }
  return m;
}

// Flow rates eta * lambda(g^-1 Q) stay below ~1.6 by construction.  The
// second-order momentum reconstruction behind hamiltonian_residuals has an
// error constant growing with the cube of the rate, and the 1e-6 residual
// budget at step 1e-3 needs rates of at most ~2.4.
action::FlowProblem random_flow_problem(SplitMix64& rng) {
  const int n = 2 + static_cast<int>(rng.uniform_index(5));
  DenseMatrix curvature = random_spd(n, 0.2, 1.0, rng);
  DenseMatrix metric = random_spd(n, 0.8, 1.5, rng);
  const double eta = rng.uniform(0.5, 1.0);
  return action::quadratic_problem(std::move(curvature), std::move(metric), eta);
}

Vector random_start(int n, SplitMix64& rng) {
  Vector start(n);
  for (double& v : start) v = rng.uniform(-1.0, 1.0);
  return start;
}

SuiteResult woodbury_suite(int instances, double tolerance, SplitMix64 rng) {
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform_index(200));
    const int rows = 1 + static_cast<int>(rng.uniform_index(10));
    Vector diagonal(n);
    for (double& d : diagonal) d = rng.uniform(0.25, 4.0);
    DenseMatrix k(rows, n);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < n; ++c) k(r, c) = rng.uniform(-1.0, 1.0);
    Vector v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);

    metric::LayerMetric lm{0, DiagonalMatrix(diagonal), k};
    const Vector fast = metric::woodbury_apply_inverse(lm, v);

    DenseMatrix dense = linalg::gram(k);
    for (int d = 0; d < n; ++d) dense(d, d) += diagonal[d];
    const Vector oracle = linalg::solve_spd(dense, v);

    Vector difference = fast;
    linalg::axpy(-1.0, oracle, difference);
    worst = std::max(worst, linalg::norm2(difference) / linalg::norm2(oracle));
  }
  SuiteResult result;
  result.passed = worst <= tolerance;
  result.line = "woodbury instances=" + std::to_string(instances) +
                " max_rel_error=" + format_float(worst) +
                " tolerance=" + format_float(tolerance);
  return result;
}

SuiteResult hamiltonian_suite(int problems, double step, double tolerance,
                           SplitMix64 rng) {
  double worst = 0.0;
  for (int p = 0; p < problems; ++p) {
    const action::FlowProblem problem = random_flow_problem(rng);
    const action::Trajectory flow = action::integrate_gradient_flow(
        problem, random_start(problem.dim, rng), 1.0, step);
    double residual = 0.0;
    for (double r : action::hamiltonian_residuals(flow, problem))
      residual = std::max(residual, r);
    double scale = 1e-12;
    for (const action::TrajectorySample& s : flow.samples)
      scale = std::max(scale, std::abs(s.lagrangian));
    worst = std::max(worst, residual / scale);
  }
  SuiteResult result;
  result.passed = worst <= tolerance;
  result.line = "hamiltonian problems=" + std::to_string(problems) +
                " max_residual_ratio=" + format_float(worst) +
                " tolerance=" + format_float(tolerance);
  return result;
}

SuiteResult action_bound_suite(int problems, double step, SplitMix64 rng) {
  double worst_margin = std::numeric_limits<double>::infinity();
  for (int p = 0; p < problems; ++p) {
    const action::FlowProblem problem = random_flow_problem(rng);
    const action::Trajectory flow = action::integrate_gradient_flow(
        problem, random_start(problem.dim, rng), 1.0, step);
    const double action_value = action::evaluate_action(flow, problem);
    const double quadrature = action::quadrature_tolerance(flow, problem);
    const double drop = problem.eta * std::abs(flow.samples.front().potential -
                                               flow.samples.back().potential);
    worst_margin = std::min(worst_margin, action_value - drop + quadrature);
  }
  SuiteResult result;
  result.passed = worst_margin >= 0.0;
  result.line = "action_bound problems=" + std::to_string(problems) +
                " min_margin=" + format_float(worst_margin);
  return result;
}

int run_verify(ConfigMap& config) {
  const RunPaths paths = read_common(config);
  const std::vector<std::string> suites = config.get_list("verify.suites");
  const int woodbury_instances =
      static_cast<int>(config.get_int("verify.woodbury.instances", 200));
  const double woodbury_tolerance =
      config.get_double("verify.woodbury.tolerance", 1e-8);
  const int hamiltonian_problems =
      static_cast<int>(config.get_int("verify.hamiltonian.problems", 20));
  const double hamiltonian_step = config.get_double("verify.hamiltonian.step", 1e-3);
  const double hamiltonian_tolerance =
      config.get_double("verify.hamiltonian.tolerance", 1e-6);
  const int bound_problems =
      static_cast<int>(config.get_int("verify.action_bound.problems", 10));
  const double bound_step = config.get_double("verify.action_bound.step", 2e-3);
  config.reject_unread();
  if (woodbury_instances < 1 || hamiltonian_problems < 1 || bound_problems < 1)
    throw ConfigInvalid("verify suite instance counts must be positive");
  if (hamiltonian_step <= 0.0 || bound_step <= 0.0)
    throw ConfigInvalid("verify integrator steps must be positive");

  SplitMix64 root(paths.seed);
  std::vector<SuiteResult> results;
  for (const std::string& suite : suites) {
    if (suite == "woodbury") {
      results.push_back(
          woodbury_suite(woodbury_instances, woodbury_tolerance, root.split()));
    } else if (suite == "hamiltonian") {
      results.push_back(hamiltonian_suite(hamiltonian_problems, hamiltonian_step,
                                          hamiltonian_tolerance, root.split()));
    } else if (suite == "action_bound") {
      results.push_back(action_bound_suite(bound_problems, bound_step, root.split()));
    } else {
      throw ConfigInvalid("verify.suites: unknown suite '" + suite + "'");
    }
  }

  bool all_passed = true;
  std::string report = resolved_header(config);
  for (const SuiteResult& result : results) {
    report += suite_line(result);
    if (!result.passed) {
      all_passed = false;
      log::error("verify: " + result.line);
    }
  }
  report += std::string("result: ") + (all_passed ? "PASS" : "FAIL") + "\n";

  ensure_out_dir(paths.out);
  atomic_write_text(paths.out / "verify.txt", report);
  log::info("verify: " + std::to_string(results.size()) + " suites, " +
            (all_passed ? "all passed" : "failures present"));
  return all_passed ? kExitSuccess : kExitVerificationFailure;
}

// ---------------------------------------------------------------------------
// stability
// ---------------------------------------------------------------------------

std::string stability_report_text(const ConfigMap& config,
                                  const stability::StabilityReport& report,
                                  const stability::BoundCheck& check,
                                  int replaced_index, int parameters) {
  const stability::StabilityConstants& c = report.constants;
  std::string text = resolved_header(config);
  text += "samples = " + std::to_string(c.samples) + "\n";
  text += "parameters = " + std::to_string(parameters) + "\n";
  text += "replaced_index = " + std::to_string(replaced_index) + "\n";
  text += "kappa_hat = " + format_float(c.kappa) + "\n";
  text += "loss_lipschitz_hat = " + format_float(c.loss_lipschitz) + "\n";
  text += "xi_hat = " + format_float(c.xi) + "\n";
  text += "mu = " + format_float(c.mu) + "\n";
  text += "transient_horizon = " + format_float(report.transient_horizon) + "\n";
  text += "final_time = " + format_float(report.history.back().time) + "\n";
  text += "flow_step_ratio = " + format_float(report.flow_step_ratio) + "\n";
  text += "observed_divergence = " + format_float(report.observed_divergence) + "\n";
  text += "divergence_bound = " + format_float(c.divergence_bound()) + "\n";
  text += "divergence_margin = " +
          format_float(c.divergence_bound() - report.observed_divergence) + "\n";
  text += "step_disturbance_bound = " + format_float(c.disturbance_bound()) + "\n";
  text += "step_disturbance_margin = " + format_float(check.step_margin) + "\n";
  text += "stacked_disturbance_bound = " +
          format_float(c.stacked_disturbance_bound()) + "\n";
  text += "stacked_disturbance_margin = " + format_float(check.stacked_margin) + "\n";
  text += "spectrum_samples = " + std::to_string(report.spectra.size()) + "\n";
  const bool divergence_ok =
      report.observed_divergence <= c.divergence_bound();
  text += std::string("divergence_within_bound = ") +
          (divergence_ok ? "true" : "false") + "\n";
  text += std::string("disturbances_within_bounds = ") +
          (check.passed ? "true" : "false") + "\n";
  return text;
}

std::string divergence_csv(const ConfigMap& config,
                           const stability::StabilityReport& report,
                           int record_every) {
  std::string text = resolved_header(config);
  text += "step,time,divergence,max_disturbance,stacked_disturbance\n";
  const std::size_t last = report.history.size() - 1;
  for (std::size_t i = 0; i < report.history.size(); ++i) {
    const stability::StepDiagnostics& d = report.history[i];
    if (i != last && d.step % record_every != 0) continue;
    text += std::to_string(d.step) + "," + format_float(d.time) + "," +
            format_float(d.divergence) + "," + format_float(d.max_disturbance) +
            "," + format_float(d.stacked_disturbance) + "\n";
  }
  return text;
}

int run_stability(ConfigMap& config) {
  const RunPaths paths = read_common(config);
  graph::Network net = network_from_config(config);
  const DatasetSource source = dataset_from_config(config);
  opt::OptimizerConfig oc = optimizer_from_config(config);
  stability::StabilityConfig sc;
  sc.steps = static_cast<int>(config.get_int("stability.steps"));
  sc.spectrum_interval =
      static_cast<int>(config.get_int("stability.spectrum_interval", 10));
  sc.rank_tolerance = config.get_double("stability.rank_tolerance", 1e-10);
  const std::int64_t replaced_key = config.get_int("stability.replaced_index", -1);
  const double target_shift =
      config.get_double("stability.replacement_target_shift", 0.0);
  const int record_every =
      static_cast<int>(config.get_int("stability.record_every", 1));
  std::vector<std::int64_t> sweep;
  if (config.contains("stability.sweep")) sweep = config.get_int_list("stability.sweep");
  config.reject_unread();
  check_model_dims(net, source);
  if (sc.steps < 1) throw ConfigInvalid("stability.steps must be at least 1");
  if (record_every < 1) throw ConfigInvalid("stability.record_every must be at least 1");
  for (std::int64_t n : sweep)
    if (n < 1) throw ConfigInvalid("stability.sweep entries must be positive");

  std::vector<std::int64_t> runs = sweep;
  if (runs.empty()) runs.push_back(source.count);

  ensure_out_dir(paths.out);
  for (std::int64_t n : runs) {
    DatasetSource per_run = source;
    per_run.count = static_cast<int>(n);
    SplitMix64 root(paths.seed);
    SplitMix64 data_rng = root.split();
    SplitMix64 init_rng = root.split();
    stability::PairedDatasets paired;
    paired.base = load_dataset(per_run, data_rng);
    const int actual = static_cast<int>(paired.base.size());
    const std::int64_t replaced = replaced_key < 0 ? actual - 1 : replaced_key;
    if (replaced < 0 || replaced >= actual)
      throw ConfigInvalid("stability.replaced_index out of range for " +
                          std::to_string(actual) + " samples");
    paired.replaced_index = static_cast<std::size_t>(replaced);
    paired.replacement = paired.base[paired.replaced_index];
    paired.replacement.target[0] += target_shift;

    graph::ParameterState params = graph::ParameterState::random_init(net, init_rng);
    sc.optimizer = oc;
    const stability::StabilityReport report =
        stability::paired_training(net, params, paired, sc);
    const stability::BoundCheck check =
        stability::disturbance_bound_check(report, report.constants);

    const std::string suffix =
        sweep.empty() ? "" : "_n" + std::to_string(actual);
    atomic_write_text(paths.out / ("stability_report" + suffix + ".txt"),
                      stability_report_text(config, report, check,
                                            static_cast<int>(replaced),
                                            net.total_params()));
    atomic_write_text(paths.out / ("divergence" + suffix + ".csv"),
                      divergence_csv(config, report, record_every));
    log::info("stability: n=" + std::to_string(actual) + " observed=" +
              format_float(report.observed_divergence) + " bound=" +
              format_float(report.constants.divergence_bound()));
  }
  return kExitSuccess;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

template <typename Op>
double time_op_ms(double min_ms, Op&& op) {
  const auto start = Clock::now();
  int reps = 0;
  double elapsed = 0.0;
  do {
    op();
    ++reps;
    elapsed = elapsed_ms(start);
  } while (elapsed < min_ms);
  return elapsed / reps;
}

int run_bench(ConfigMap& config) {
  const RunPaths paths = read_common(config);
  const int d = static_cast<int>(config.get_int("bench.dims", 10));
  const std::vector<std::int64_t> sizes = config.get_int_list("bench.sizes");
  const double min_ms = config.get_double("bench.min_time_ms", 20.0);
  config.reject_unread();
  if (d < 1) throw ConfigInvalid("bench.dims must be positive");
  if (min_ms <= 0.0) throw ConfigInvalid("bench.min_time_ms must be positive");
  for (std::int64_t n : sizes)
    if (n < 1) throw ConfigInvalid("bench.sizes entries must be positive");

  SplitMix64 rng(paths.seed);
  double sink = 0.0;
  std::string csv = resolved_header(config);
  csv += "n_alpha,d,woodbury_ms,dense_ms\n";
  std::int64_t crossover = -1;
  for (std::int64_t size : sizes) {
    const int n = static_cast<int>(size);
    Vector diagonal(n);
    for (double& v : diagonal) v = rng.uniform(0.5, 1.5);
    DenseMatrix k(d, n);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < n; ++c) k(r, c) = rng.uniform(-1.0, 1.0);
    Vector v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    const metric::LayerMetric lm{0, DiagonalMatrix(diagonal), k};

    const double woodbury_ms = time_op_ms(min_ms, [&] {
      sink += metric::woodbury_apply_inverse(lm, v)[0];
    });
    const double dense_ms = time_op_ms(min_ms, [&] {
      DenseMatrix dense = linalg::gram(k);
      for (int i = 0; i < n; ++i) dense(i, i) += diagonal[i];
      sink += linalg::solve_spd(dense, v)[0];
    });
    if (crossover < 0 && woodbury_ms < dense_ms) crossover = size;
    csv += std::to_string(size) + "," + std::to_string(d) + "," +
           format_float(woodbury_ms) + "," + format_float(dense_ms) + "\n";
    log::info("bench: n_alpha=" + std::to_string(size) + " woodbury_ms=" +
              format_float(woodbury_ms) + " dense_ms=" + format_float(dense_ms));
  }
  csv += crossover < 0
             ? "# crossover: woodbury never faster within this sweep\n"
             : "# crossover: woodbury faster from n_alpha = " +
                   std::to_string(crossover) + "\n";
  log::debug("bench sink " + format_float(sink));

  ensure_out_dir(paths.out);
  atomic_write_text(paths.out / "bench.csv", csv);
  return kExitSuccess;
}

}  // namespace

int run_command(const std::string& subcommand, ConfigMap config) {
  const std::string declared = config.get_string("subcommand", subcommand);
  if (declared != subcommand)
    throw ConfigInvalid("config declares subcommand '" + declared +
                        "' but '" + subcommand + "' was invoked");
  if (subcommand == "train") return run_train(config);
  if (subcommand == "verify") return run_verify(config);
  if (subcommand == "stability") return run_stability(config);
  if (subcommand == "bench") return run_bench(config);
  throw ConfigInvalid("unknown subcommand '" + subcommand + "'");
}

int run_command_exit(const std::string& subcommand, ConfigMap config) {
  try {
    return run_command(subcommand, std::move(config));
  } catch (const ConfigInvalid& e) {
    log::error(e.what());
    return kExitConfigInvalid;
  } catch (const IoFailure& e) {
    log::error(e.what());
    return kExitIoFailure;
  } catch (const NonFinite& e) {
    log::error(e.what());
    return kExitNonFinite;
  } catch (const Error& e) {
    log::error(e.what());
    return kExitFailure;
  }
}

}  // namespace riemann::cli
