// Copyright 2026 The OES Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace oes {

enum class Activation { Softplus, Tanh, Identity };

Activation activation_from_string(std::string_view name);  // throws on unknown
std::string_view to_string(Activation a);

/// Architecture of a small fully connected network.
///
/// Hidden activations are listed per hidden layer; the output layer is
/// affine, optionally followed by a Softplus (used for nonnegative gain
/// outputs). Evaluation and all derivative routines below are pure
/// functions of (spec, params, input) and safe to call concurrently.
struct MlpSpec {
  int input_dim = 0;
  int output_dim = 1;
  std::vector<int> hidden_widths;
  std::vector<Activation> hidden_activations;
  Activation output_activation = Activation::Identity;

  int layer_count() const { return static_cast<int>(hidden_widths.size()) + 1; }
  int layer_input_dim(int layer) const;
  int layer_output_dim(int layer) const;
  int param_count() const;

  /// Canonical text form, e.g. "mlp in=1 out=1 hidden=64,64
  /// act=softplus,tanh outact=none". Hashed for checkpoint headers.
  std::string describe() const;
  std::uint64_t hash() const;

  void validate() const;  // throws std::invalid_argument
};

/// Flat parameter storage. Layout is layer major: for each layer, the
/// weight matrix is stored row by row (one row per output unit), followed
/// by the bias vector. Hidden layers come first, the output layer last.
using ParamVector = Eigen::VectorXd;

/// Reusable forward-pass buffers for one architecture. Derivative routines
/// accept a tape so that a caller evaluating several quantities at the same
/// input pays for the forward pass once. Not thread safe; use one per
/// thread.
struct MlpTape {
  std::vector<Eigen::VectorXd> pre;    // pre-activations per layer
  std::vector<Eigen::VectorXd> post;   // post-activations (post[0] is input)
  Eigen::VectorXd out;                 // network output
  // scratch owned here so hot loops do not allocate
  std::vector<Eigen::VectorXd> d1, d2;      // sigma' and sigma'' at pre
  std::vector<Eigen::VectorXd> tan_pre, tan_post;
  std::vector<Eigen::VectorXd> adj, adj_tan;
};

/// Runs the forward pass at z, filling the tape. Throws on dimension
/// mismatch or non-finite input.
void mlp_forward_tape(const MlpSpec& spec, const ParamVector& theta,
                      const Eigen::VectorXd& z, MlpTape& tape);

Eigen::VectorXd mlp_forward(const MlpSpec& spec, const ParamVector& theta,
                            const Eigen::VectorXd& z);

/// Exact Jacobian d(output)/d(input), shape output_dim x input_dim.
Eigen::MatrixXd mlp_grad_input(const MlpSpec& spec, const ParamVector& theta,
                               const Eigen::VectorXd& z);
Eigen::MatrixXd mlp_grad_input_tape(const MlpSpec& spec, const ParamVector& theta,
                                    MlpTape& tape);

/// Exact input Hessian of one output component, shape input_dim x input_dim.
Eigen::MatrixXd mlp_input_hessian(const MlpSpec& spec, const ParamVector& theta,
                                  const Eigen::VectorXd& z, int output_index = 0);
Eigen::MatrixXd mlp_input_hessian_tape(const MlpSpec& spec, const ParamVector& theta,
                                       MlpTape& tape, int output_index = 0);

/// Reverse accumulation of cotangent^T d(output)/d(params).
Eigen::VectorXd mlp_vjp_params(const MlpSpec& spec, const ParamVector& theta,
                               const Eigen::VectorXd& z,
                               const Eigen::VectorXd& cotangent);
void mlp_vjp_params_tape(const MlpSpec& spec, const ParamVector& theta,
                         MlpTape& tape, const Eigen::VectorXd& cotangent,
                         Eigen::Ref<Eigen::VectorXd> result);

/// Parameter gradient of the directional input derivative:
/// grad_theta <v, d(output)/d(input)> for a scalar-output network.
/// This is the vector-product interface to the mixed second derivative
/// d(d out/dz)/d(theta), computed by forward-over-reverse accumulation.
Eigen::VectorXd mlp_grad_gradient_vjp(const MlpSpec& spec, const ParamVector& theta,
                                      const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& tangent);
void mlp_grad_gradient_vjp_tape(const MlpSpec& spec, const ParamVector& theta,
                                MlpTape& tape, const Eigen::VectorXd& tangent,
                                Eigen::Ref<Eigen::VectorXd> result);

/// Glorot uniform initialization: weights drawn from U(-a, a) with
/// a = sqrt(6 / (fan_in + fan_out)), biases zero. Deterministic per rng
/// state; the draw sequence is implementation-independent.
ParamVector xavier_init(const MlpSpec& spec, std::mt19937_64& rng);

/// Zeroes the final affine layer (weights and bias) in place and returns
/// the argument. With an Identity output activation the network then
/// evaluates to zero everywhere; with a Softplus output it evaluates to
/// the constant softplus(0) = log 2.
ParamVector& zero_last_layer(const MlpSpec& spec, ParamVector& theta);

/// Certified sup bound on |output| for scalar networks whose last hidden
/// activation is bounded (tanh, bound 1) and whose output is affine:
/// bound = sum_i |w_i| + |b| over the final layer.
/// The output bias widens the certified range by |b|; a constant offset
/// does not affect the gradient, so downstream stability arguments are
/// unchanged. Throws if the last hidden activation is unbounded or an
/// output activation is present.
double output_bound(const MlpSpec& spec, const ParamVector& theta);

enum class ParamFormat { Binary, Text };

/// Writes parameters with a small header (format version, architecture
/// hash, count). Binary payload is little-endian IEEE-754 doubles; text
/// payload prints one %.17g value per line. Both round-trip bit exactly.
void save_params(const std::string& path, const MlpSpec& spec,
                 const ParamVector& theta, ParamFormat format = ParamFormat::Binary);

/// Loads parameters saved by save_params, validating the header against
/// the expected architecture. Throws on hash or length mismatch.
ParamVector load_params(const std::string& path, const MlpSpec& spec);

}  // namespace oes
