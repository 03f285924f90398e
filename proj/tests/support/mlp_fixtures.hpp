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

// Random network fixtures shared by the test suites, plus a standalone
// evaluator that recomputes a forward pass from the layer descriptions
// without touching the tape machinery.

#ifndef RIEMANN_TESTS_SUPPORT_MLP_FIXTURES_HPP
#define RIEMANN_TESTS_SUPPORT_MLP_FIXTURES_HPP

#include <cmath>
#include <vector>

#include "riemann/module_graph.hpp"
#include "riemann/rng.hpp"

namespace riemann::testing {

using graph::Activation;
using graph::Kind;
using graph::ModulePtr;
using graph::Network;
using graph::ParameterState;
using linalg::Vector;

// linear/bias/nonlinearity blocks for each hidden width, ending in a linear
// (+ bias) readout with no final nonlinearity.
inline ModulePtr mlp(const std::vector<int>& dims, Activation hidden) {
  std::vector<ModulePtr> stages;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    stages.push_back(graph::linear(dims[i], dims[i + 1]));
    stages.push_back(graph::bias(dims[i + 1]));
    if (i + 2 < dims.size()) stages.push_back(graph::pointwise(hidden, dims[i + 1]));
  }
  return graph::compose_sequential(std::move(stages));
}

inline std::vector<int> random_dims(SplitMix64& rng, int max_layers = 4,
                                    int max_width = 16) {
  const int hidden = 1 + static_cast<int>(rng.uniform_index(max_layers));
  std::vector<int> dims;
  dims.push_back(1 + static_cast<int>(rng.uniform_index(max_width)));
  for (int i = 0; i < hidden; ++i)
    dims.push_back(1 + static_cast<int>(rng.uniform_index(max_width)));
  return dims;
}

// Re-evaluates a chain network layer by layer straight from the flat
// parameter vector.  Intentionally ignores the Tape/adjoint machinery so it
// can serve as an oracle for forward().  Only valid for purely sequential
// graphs.
inline Vector replay_forward(const Network& net, const Vector& flat,
                             Vector x) {
  for (int a = 0; a < net.num_layers(); ++a) {
    const graph::Layer& layer = net.layer(a);
    Vector y(static_cast<std::size_t>(layer.output_dim));
    switch (layer.kind) {
      case Kind::kLinear:
        for (int i = 0; i < layer.output_dim; ++i) {
          double s = 0.0;
          for (int k = 0; k < layer.input_dim; ++k)
            s += flat[static_cast<std::size_t>(layer.param_offset) +
                      static_cast<std::size_t>(i) * layer.input_dim + k] *
                 x[static_cast<std::size_t>(k)];
          y[static_cast<std::size_t>(i)] = s;
        }
        break;
      case Kind::kBias:
        for (int i = 0; i < layer.output_dim; ++i)
          y[static_cast<std::size_t>(i)] =
              x[static_cast<std::size_t>(i)] +
              flat[static_cast<std::size_t>(layer.param_offset) + i];
        break;
      default:
        for (int i = 0; i < layer.output_dim; ++i) {
          const double v = x[static_cast<std::size_t>(i)];
          switch (layer.activation) {
            case Activation::kRelu:
              y[static_cast<std::size_t>(i)] = v > 0.0 ? v : 0.0;
              break;
            case Activation::kTanh:
              y[static_cast<std::size_t>(i)] = std::tanh(v);
              break;
            case Activation::kIdentity:
              y[static_cast<std::size_t>(i)] = v;
              break;
          }
        }
        break;
    }
    x = std::move(y);
  }
  return x;
}

}  // namespace riemann::testing

#endif  // RIEMANN_TESTS_SUPPORT_MLP_FIXTURES_HPP
