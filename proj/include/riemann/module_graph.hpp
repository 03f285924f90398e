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

// Composable network modules over real coordinate spaces.  A module is an
// immutable expression tree of Linear / Bias / pointwise nonlinearity leaves
// combined by sequential and parallel composition.  A Network flattens the
// leaves into indexed layers with contiguous parameter blocks; forward
// evaluation records a Tape of per-layer inputs so reverse sweeps can build
// adjoints, per-layer Jacobians and metric factor pullbacks.

#ifndef RIEMANN_MODULE_GRAPH_HPP
#define RIEMANN_MODULE_GRAPH_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "riemann/linalg.hpp"
#include "riemann/rng.hpp"

namespace riemann::graph {

using linalg::DenseMatrix;
using linalg::Vector;

enum class Kind { kLinear, kBias, kNonlinearity, kSequential, kParallel };
enum class Activation { kRelu, kTanh, kIdentity };

struct Module;
using ModulePtr = std::shared_ptr<const Module>;

/// Immutable node of the module expression tree.  Built through the factory
/// functions below, which validate dimensions.
struct Module {
  Kind kind = Kind::kLinear;
  Activation activation = Activation::kIdentity;
  int input_dim = 0;
  int output_dim = 0;
  std::vector<ModulePtr> children;
};

/// y = A x with A an output_dim x input_dim matrix, stored row-major in the
/// layer's parameter block.
ModulePtr linear(int input_dim, int output_dim);

/// y = x + b with b the parameter block.
ModulePtr bias(int dim);

/// y_i = sigma(x_i) applied coordinatewise; no parameters.
ModulePtr pointwise(Activation activation, int dim);

/// Function composition: x -> second(first(x)).  Throws DimensionMismatch
/// unless second.input_dim == first.output_dim.
ModulePtr compose_sequential(ModulePtr first, ModulePtr second);
ModulePtr compose_sequential(std::vector<ModulePtr> stages);

/// Cartesian pairing: splits the input by child input dims and concatenates
/// the child outputs.
ModulePtr compose_parallel(ModulePtr top, ModulePtr bottom);

double apply_activation(Activation activation, double x);
double activation_slope(Activation activation, double x);

/// One flattened leaf of the tree, in depth-first traversal order.  The
/// traversal order also fixes the parameter block layout.
struct Layer {
  Kind kind = Kind::kLinear;
  Activation activation = Activation::kIdentity;
  int input_dim = 0;
  int output_dim = 0;
  int param_offset = 0;
  int param_count = 0;
};

/// Executable view of a module tree.  Construction assigns every leaf an
/// index and a parameter block; the tree itself stays shared and immutable.
class Network {
 public:
  explicit Network(ModulePtr root);

  int input_dim() const { return root_->input_dim; }
  int output_dim() const { return root_->output_dim; }
  int num_layers() const { return static_cast<int>(layers_.size()); }
  const Layer& layer(int index) const { return layers_[index]; }
  const std::vector<Layer>& layers() const { return layers_; }
  int total_params() const { return total_params_; }
  const ModulePtr& root() const { return root_; }

  /// Distinguishes tapes produced by different Network instances.
  std::uint64_t token() const { return token_; }

 private:
  ModulePtr root_;
  std::vector<Layer> layers_;
  int total_params_ = 0;
  std::uint64_t token_ = 0;
};

/// Flat parameter vector with the per-layer block boundaries frozen at
/// construction.
class ParameterState {
 public:
  explicit ParameterState(const Network& net);

  /// Uniform entries in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer, drawn
  /// in layer order so the result is reproducible from the generator state.
  static ParameterState random_init(const Network& net, SplitMix64& rng);

  Vector& flat() { return flat_; }
  const Vector& flat() const { return flat_; }
  std::span<double> block(int layer);
  std::span<const double> block(int layer) const;
  int num_layers() const { return static_cast<int>(blocks_.size()); }

 private:
  Vector flat_;
  std::vector<std::pair<int, int>> blocks_;  // offset, count per layer
};

/// Record of one forward evaluation: the input seen by every layer plus the
/// network output.  Reverse sweeps consume it; a tape from a different
/// network (or a default-constructed one) triggers StaleTape.
struct Tape {
  std::uint64_t network_token = 0;
  Vector input;
  Vector output;
  std::vector<Vector> layer_inputs;
};

/// Evaluates the network and records the tape.
Tape forward(const Network& net, const ParameterState& params,
             std::span<const double> x);

/// Covectors produced by one reverse sweep: layer_covectors[a] lives in
/// layer a's output activation space, input_covector in the network input
/// space.  The parameter gradient block of layer a is
/// (d f^(a) / d w^(a))^T layer_covectors[a].
struct AdjointTrace {
  Vector input_covector;
  std::vector<Vector> layer_covectors;
};

AdjointTrace backward_adjoints(const Network& net, const ParameterState& params,
                               const Tape& tape,
                               std::span<const double> output_covector);

/// Flat parameter gradient of the scalar <output_covector, y> in one reverse
/// sweep.
Vector parameter_gradient(const Network& net, const ParameterState& params,
                          const Tape& tape,
                          std::span<const double> output_covector);

/// d y / d w^(layer), shape output_dim x param_count(layer), built from
/// output_dim reverse sweeps seeded with unit covectors.  Layers without
/// parameters yield a matrix with zero columns.
DenseMatrix layer_jacobian(const Network& net, const ParameterState& params,
                           const Tape& tape, int layer);

/// All per-layer Jacobians from the same output_dim reverse sweeps.
std::vector<DenseMatrix> all_layer_jacobians(const Network& net,
                                             const ParameterState& params,
                                             const Tape& tape);

/// d y / d w over the whole flat parameter vector, shape
/// output_dim x total_params.
DenseMatrix output_jacobian(const Network& net, const ParameterState& params,
                            const Tape& tape);

/// Given a factor L_y of the metric on the layer's output space, returns
/// L_x = L_y * (d y / d x at the taped input), so L_x^T L_x is the pullback
/// metric on the layer's input space.
DenseMatrix pullback_factor(const DenseMatrix& l_y, const Network& net,
                            const ParameterState& params, const Tape& tape,
                            int layer);

}  // namespace riemann::graph

#endif  // RIEMANN_MODULE_GRAPH_HPP
