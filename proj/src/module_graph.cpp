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

#include "riemann/module_graph.hpp"

#include <atomic>
#include <cmath>
#include <string>
#include <utility>

#include "riemann/errors.hpp"

namespace riemann::graph {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

int leaf_param_count(const Module& node) {
  switch (node.kind) {
    case Kind::kLinear:
      return node.input_dim * node.output_dim;
    case Kind::kBias:
      return node.input_dim;
    default:
      return 0;
  }
}

bool is_leaf(const Module& node) {
  return node.kind == Kind::kLinear || node.kind == Kind::kBias ||
         node.kind == Kind::kNonlinearity;
}

std::uint64_t next_token() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

}  // namespace

ModulePtr linear(int input_dim, int output_dim) {
  require(input_dim > 0 && output_dim > 0, "linear: dimensions must be positive");
  auto m = std::make_shared<Module>();
  m->kind = Kind::kLinear;
  m->input_dim = input_dim;
  m->output_dim = output_dim;
  return m;
}

ModulePtr bias(int dim) {
  require(dim > 0, "bias: dimension must be positive");
  auto m = std::make_shared<Module>();
  m->kind = Kind::kBias;
  m->input_dim = dim;
  m->output_dim = dim;
  return m;
}

ModulePtr pointwise(Activation activation, int dim) {
  require(dim > 0, "pointwise: dimension must be positive");
  auto m = std::make_shared<Module>();
  m->kind = Kind::kNonlinearity;
  m->activation = activation;
  m->input_dim = dim;
  m->output_dim = dim;
  return m;
}

ModulePtr compose_sequential(ModulePtr first, ModulePtr second) {
  require(first && second, "compose_sequential: null child");
  require(second->input_dim == first->output_dim,
          "compose_sequential: inner dimensions differ (" +
              std::to_string(first->output_dim) + " vs " +
              std::to_string(second->input_dim) + ")");
  auto m = std::make_shared<Module>();
  m->kind = Kind::kSequential;
  m->input_dim = first->input_dim;
  m->output_dim = second->output_dim;
  m->children = {std::move(first), std::move(second)};
  return m;
}

ModulePtr compose_sequential(std::vector<ModulePtr> stages) {
  require(!stages.empty(), "compose_sequential: empty stage list");
  ModulePtr acc = std::move(stages.front());
  for (std::size_t i = 1; i < stages.size(); ++i)
    acc = compose_sequential(std::move(acc), std::move(stages[i]));
  return acc;
}

ModulePtr compose_parallel(ModulePtr top, ModulePtr bottom) {
  require(top && bottom, "compose_parallel: null child");
  auto m = std::make_shared<Module>();
  m->kind = Kind::kParallel;
  m->input_dim = top->input_dim + bottom->input_dim;
  m->output_dim = top->output_dim + bottom->output_dim;
  m->children = {std::move(top), std::move(bottom)};
  return m;
}

double apply_activation(Activation activation, double x) {
  switch (activation) {
    case Activation::kRelu:
      return x > 0.0 ? x : 0.0;
    case Activation::kTanh:
      return std::tanh(x);
    case Activation::kIdentity:
      return x;
  }
  return x;
}

double activation_slope(Activation activation, double x) {
  switch (activation) {
    case Activation::kRelu:
      // Slope at exactly zero is taken as zero.
      return x > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::kIdentity:
      return 1.0;
  }
  return 1.0;
}

Network::Network(ModulePtr root) : root_(std::move(root)), token_(next_token()) {
  require(static_cast<bool>(root_), "Network: null module");
  // Depth-first, left-to-right leaf order; the same order fixes parameter
  // block offsets.
  std::vector<const Module*> order;
  const auto walk = [&](auto&& self, const Module& node) -> void {
    if (is_leaf(node)) {
      order.push_back(&node);
      return;
    }
    for (const ModulePtr& child : node.children) self(self, *child);
  };
  walk(walk, *root_);
  layers_.reserve(order.size());
  int offset = 0;
  for (const Module* node : order) {
    Layer layer;
    layer.kind = node->kind;
    layer.activation = node->activation;
    layer.input_dim = node->input_dim;
    layer.output_dim = node->output_dim;
    layer.param_offset = offset;
    layer.param_count = leaf_param_count(*node);
    offset += layer.param_count;
    layers_.push_back(layer);
  }
  total_params_ = offset;
}

ParameterState::ParameterState(const Network& net)
    : flat_(static_cast<std::size_t>(net.total_params()), 0.0) {
  blocks_.reserve(net.num_layers());
  for (const Layer& layer : net.layers())
    blocks_.emplace_back(layer.param_offset, layer.param_count);
}

ParameterState ParameterState::random_init(const Network& net, SplitMix64& rng) {
  ParameterState state(net);
  for (int a = 0; a < net.num_layers(); ++a) {
    const Layer& layer = net.layer(a);
    if (layer.param_count == 0) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.input_dim));
    for (double& w : state.block(a)) w = rng.uniform(-bound, bound);
  }
  return state;
}

std::span<double> ParameterState::block(int layer) {
  const auto [offset, count] = blocks_[layer];
  return {flat_.data() + offset, static_cast<std::size_t>(count)};
}

std::span<const double> ParameterState::block(int layer) const {
  const auto [offset, count] = blocks_[layer];
  return {flat_.data() + offset, static_cast<std::size_t>(count)};
}

namespace {

Vector apply_leaf(const Module& node, std::span<const double> w,
                  const Vector& x) {
  const int in = node.input_dim;
  const int out = node.output_dim;
  Vector y(static_cast<std::size_t>(out));
  switch (node.kind) {
    case Kind::kLinear:
      for (int i = 0; i < out; ++i) {
        double s = 0.0;
        const double* row = w.data() + static_cast<std::size_t>(i) * in;
        for (int k = 0; k < in; ++k) s += row[k] * x[k];
        y[i] = s;
      }
      break;
    case Kind::kBias:
      for (int i = 0; i < out; ++i) y[i] = x[i] + w[i];
      break;
    default:
      for (int i = 0; i < out; ++i) y[i] = apply_activation(node.activation, x[i]);
      break;
  }
  return y;
}

Vector eval(const Module& node, const ParameterState& params, Tape& tape,
            int& leaf, Vector x) {
  switch (node.kind) {
    case Kind::kSequential:
      for (const ModulePtr& child : node.children)
        x = eval(*child, params, tape, leaf, std::move(x));
      return x;
    case Kind::kParallel: {
      Vector out;
      out.reserve(static_cast<std::size_t>(node.output_dim));
      std::size_t pos = 0;
      for (const ModulePtr& child : node.children) {
        Vector part(x.begin() + pos, x.begin() + pos + child->input_dim);
        pos += static_cast<std::size_t>(child->input_dim);
        Vector y = eval(*child, params, tape, leaf, std::move(part));
        out.insert(out.end(), y.begin(), y.end());
      }
      return out;
    }
    default: {
      const int idx = leaf++;
      Vector y = apply_leaf(node, params.block(idx), x);
      tape.layer_inputs[idx] = std::move(x);
      return y;
    }
  }
}

// Reverse traversal mirror of eval.  Walks children backwards so the leaf
// counter retraces the forward numbering, pulls the covector through each
// leaf, and optionally records per-leaf covectors and the flat parameter
// gradient.
Vector pull(const Module& node, const ParameterState& params, const Tape& tape,
            int& leaf, Vector lambda, std::vector<Vector>* leaf_covectors,
            Vector* grad, const Network& net) {
  switch (node.kind) {
    case Kind::kSequential:
      for (auto it = node.children.rbegin(); it != node.children.rend(); ++it)
        lambda = pull(**it, params, tape, leaf, std::move(lambda),
                      leaf_covectors, grad, net);
      return lambda;
    case Kind::kParallel: {
      Vector input_cov(static_cast<std::size_t>(node.input_dim));
      std::size_t out_end = lambda.size();
      std::size_t in_end = input_cov.size();
      for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) {
        const Module& child = **it;
        Vector part(lambda.begin() + (out_end - child.output_dim),
                    lambda.begin() + out_end);
        out_end -= static_cast<std::size_t>(child.output_dim);
        Vector child_cov = pull(child, params, tape, leaf, std::move(part),
                                leaf_covectors, grad, net);
        std::copy(child_cov.begin(), child_cov.end(),
                  input_cov.begin() + (in_end - child.input_dim));
        in_end -= static_cast<std::size_t>(child.input_dim);
      }
      return input_cov;
    }
    default: {
      const int idx = --leaf;
      const Vector& x = tape.layer_inputs[idx];
      const std::span<const double> w = params.block(idx);
      const int in = node.input_dim;
      const int out = node.output_dim;
      if (grad != nullptr) {
        double* g = grad->data() + net.layer(idx).param_offset;
        if (node.kind == Kind::kLinear) {
          for (int i = 0; i < out; ++i)
            for (int k = 0; k < in; ++k)
              g[static_cast<std::size_t>(i) * in + k] = lambda[i] * x[k];
        } else if (node.kind == Kind::kBias) {
          for (int i = 0; i < out; ++i) g[i] = lambda[i];
        }
      }
      Vector input_cov(static_cast<std::size_t>(in));
      switch (node.kind) {
        case Kind::kLinear:
          for (int k = 0; k < in; ++k) {
            double s = 0.0;
            for (int i = 0; i < out; ++i)
              s += w[static_cast<std::size_t>(i) * in + k] * lambda[i];
            input_cov[k] = s;
          }
          break;
        case Kind::kBias:
          input_cov = lambda;
          break;
        default:
          for (int i = 0; i < in; ++i)
            input_cov[i] = activation_slope(node.activation, x[i]) * lambda[i];
          break;
      }
      if (leaf_covectors != nullptr) (*leaf_covectors)[idx] = std::move(lambda);
      return input_cov;
    }
  }
}

void check_tape(const Network& net, const Tape& tape) {
  if (tape.network_token != net.token() ||
      static_cast<int>(tape.layer_inputs.size()) != net.num_layers())
    throw StaleTape("tape does not belong to this network");
}

void check_params(const Network& net, const ParameterState& params) {
  if (static_cast<int>(params.flat().size()) != net.total_params())
    throw DimensionMismatch("parameter vector length does not match network");
}

void check_covector(const Network& net, std::span<const double> covector) {
  if (static_cast<int>(covector.size()) != net.output_dim())
    throw DimensionMismatch("output covector dimension mismatch");
}

}  // namespace

Tape forward(const Network& net, const ParameterState& params,
             std::span<const double> x) {
  check_params(net, params);
  if (static_cast<int>(x.size()) != net.input_dim())
    throw DimensionMismatch("forward: input dimension mismatch");
  Tape tape;
  tape.network_token = net.token();
  tape.input.assign(x.begin(), x.end());
  tape.layer_inputs.resize(static_cast<std::size_t>(net.num_layers()));
  int leaf = 0;
  tape.output = eval(*net.root(), params, tape, leaf, tape.input);
  return tape;
}

AdjointTrace backward_adjoints(const Network& net, const ParameterState& params,
                               const Tape& tape,
                               std::span<const double> output_covector) {
  check_tape(net, tape);
  check_params(net, params);
  check_covector(net, output_covector);
  AdjointTrace trace;
  trace.layer_covectors.resize(static_cast<std::size_t>(net.num_layers()));
  int leaf = net.num_layers();
  trace.input_covector =
      pull(*net.root(), params, tape, leaf,
           Vector(output_covector.begin(), output_covector.end()),
           &trace.layer_covectors, nullptr, net);
  return trace;
}

Vector parameter_gradient(const Network& net, const ParameterState& params,
                          const Tape& tape,
                          std::span<const double> output_covector) {
  check_tape(net, tape);
  check_params(net, params);
  check_covector(net, output_covector);
  Vector grad(static_cast<std::size_t>(net.total_params()), 0.0);
  int leaf = net.num_layers();
  pull(*net.root(), params, tape, leaf,
       Vector(output_covector.begin(), output_covector.end()), nullptr, &grad,
       net);
  return grad;
}

std::vector<DenseMatrix> all_layer_jacobians(const Network& net,
                                             const ParameterState& params,
                                             const Tape& tape) {
  check_tape(net, tape);
  check_params(net, params);
  const int n_o = net.output_dim();
  std::vector<DenseMatrix> jacobians;
  jacobians.reserve(static_cast<std::size_t>(net.num_layers()));
  for (const Layer& layer : net.layers())
    jacobians.emplace_back(n_o, layer.param_count);
  Vector seed(static_cast<std::size_t>(n_o), 0.0);
  for (int r = 0; r < n_o; ++r) {
    seed[r] = 1.0;
    const Vector grad = parameter_gradient(net, params, tape, seed);
    seed[r] = 0.0;
    for (int a = 0; a < net.num_layers(); ++a) {
      const Layer& layer = net.layer(a);
      for (int c = 0; c < layer.param_count; ++c)
        jacobians[a](r, c) = grad[static_cast<std::size_t>(layer.param_offset) + c];
    }
  }
  return jacobians;
}

DenseMatrix layer_jacobian(const Network& net, const ParameterState& params,
                           const Tape& tape, int layer) {
  check_tape(net, tape);
  check_params(net, params);
  if (layer < 0 || layer >= net.num_layers())
    throw DimensionMismatch("layer_jacobian: layer index out of range");
  const int n_o = net.output_dim();
  const Layer& info = net.layer(layer);
  DenseMatrix j(n_o, info.param_count);
  Vector seed(static_cast<std::size_t>(n_o), 0.0);
  for (int r = 0; r < n_o; ++r) {
    seed[r] = 1.0;
    const Vector grad = parameter_gradient(net, params, tape, seed);
    seed[r] = 0.0;
    for (int c = 0; c < info.param_count; ++c)
      j(r, c) = grad[static_cast<std::size_t>(info.param_offset) + c];
  }
  return j;
}

DenseMatrix output_jacobian(const Network& net, const ParameterState& params,
                            const Tape& tape) {
  check_tape(net, tape);
  check_params(net, params);
  const int n_o = net.output_dim();
  DenseMatrix j(n_o, net.total_params());
  Vector seed(static_cast<std::size_t>(n_o), 0.0);
  for (int r = 0; r < n_o; ++r) {
    seed[r] = 1.0;
    const Vector grad = parameter_gradient(net, params, tape, seed);
    seed[r] = 0.0;
    for (int c = 0; c < net.total_params(); ++c) j(r, c) = grad[c];
  }
  return j;
}

DenseMatrix pullback_factor(const DenseMatrix& l_y, const Network& net,
                            const ParameterState& params, const Tape& tape,
                            int layer) {
  check_tape(net, tape);
  check_params(net, params);
  if (layer < 0 || layer >= net.num_layers())
    throw DimensionMismatch("pullback_factor: layer index out of range");
  const Layer& info = net.layer(layer);
  if (l_y.cols() != info.output_dim)
    throw DimensionMismatch("pullback_factor: factor does not match layer output");
  const int rows = l_y.rows();
  DenseMatrix l_x(rows, info.input_dim);
  switch (info.kind) {
    case Kind::kLinear: {
      const std::span<const double> w = params.block(layer);
      for (int r = 0; r < rows; ++r)
        for (int k = 0; k < info.input_dim; ++k) {
          double s = 0.0;
          for (int i = 0; i < info.output_dim; ++i)
            s += l_y(r, i) * w[static_cast<std::size_t>(i) * info.input_dim + k];
          l_x(r, k) = s;
        }
      break;
    }
    case Kind::kBias:
      l_x = l_y;
      break;
    default: {
      const Vector& x = tape.layer_inputs[layer];
      for (int r = 0; r < rows; ++r)
        for (int k = 0; k < info.input_dim; ++k)
          l_x(r, k) = l_y(r, k) * activation_slope(info.activation, x[k]);
      break;
    }
  }
  return l_x;
}

}  // namespace riemann::graph
