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

#include <random>
#include <string>

#include "oes/mlp.hpp"
#include "oes/ph.hpp"

namespace oes {

/// Energy-shaping controller with neural components:
///
///   u = -B^{-1} grad_q Vstar(q)  -  diag(K(t, q, p)) B M^{-1}(q) p
///
/// where Vstar is a scalar shaped potential added to the plant potential
/// and K produces nonnegative damping gains through a softplus output.
/// When conditioned on a set point, the potential net takes (q, q*) and
/// the gain net (q, p, q*); otherwise the gain net takes (t/T, q, p) with
/// the time input normalized by the horizon.
struct OesController {
  MlpSpec potential_spec;
  ParamVector theta_potential;
  MlpSpec gain_spec;
  ParamVector theta_gain;
  double horizon = 3.0;  ///< T [s]
  bool setpoint_conditioned = false;

  int n_q() const { return gain_spec.output_dim; }
  int param_count() const;

  /// Concatenated (theta_potential, theta_gain).
  ParamVector packed_params() const;
  void set_packed_params(const ParamVector& theta);

  /// Network input vectors for the two components.
  Eigen::VectorXd potential_input(const Eigen::VectorXd& q, double q_star) const;
  Eigen::VectorXd gain_input(double t, const Eigen::VectorXd& q,
                             const Eigen::VectorXd& p, double q_star) const;

  /// Checks the structural invariants: softplus gain output, bounded (tanh)
  /// last hidden activation of the potential net, consistent input sizes.
  void validate() const;
};

/// How a freshly constructed controller is initialized (weights are Glorot
/// uniform in both cases).
enum class InitMode {
  /// Final affine layers zeroed. The shaped potential then vanishes
  /// identically while the gain equals the constant softplus(0) = log 2,
  /// i.e. the energy-shaping term starts at zero with a small residual
  /// damping. This is the default training start.
  ZeroLastLayer,
  /// As above, plus the gain net's output bias is pushed to -40 so the
  /// initial gain is ~4e-18 and the control law vanishes to machine
  /// precision; the closed loop is then indistinguishable from the open
  /// loop. Used for identity checks; impractical as a training start since
  /// the saturated softplus blocks gradient flow to the gain.
  ZeroControl
};

InitMode init_mode_from_string(const std::string& name);
std::string to_string(InitMode mode);

/// Architecture description used to build controllers from configs.
struct OesArchitecture {
  std::vector<int> potential_hidden{64, 64};
  std::vector<Activation> potential_activations{Activation::Softplus, Activation::Tanh};
  std::vector<int> gain_hidden{64};
  std::vector<Activation> gain_activations{Activation::Softplus};
  /// Output bias of the gain net after zeroing its last layer; the initial
  /// damping gain is softplus(this). Zero reproduces the constant log 2.
  double gain_output_bias = 0.0;
};

/// Builds a pendulum (n_q = 1) controller with the given hidden layout and
/// initializes it. Deterministic per rng state.
OesController make_oes_controller(const OesArchitecture& arch, double horizon,
                                  bool setpoint_conditioned, std::mt19937_64& rng,
                                  InitMode init = InitMode::ZeroLastLayer);

/// u = -B^{-1} grad_q Vstar - diag(k) B M^{-1} p at (t, q, p). Throws if a
/// gain entry comes out negative (impossible by construction).
Eigen::VectorXd oes_control(const OesController& c, const MechanicalPH& plant, double t,
                            const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                            double q_star = 0.0);

/// Shaped closed-loop energy H(q, p) + Vstar(q).
double shaped_energy(const OesController& c, const MechanicalPH& plant,
                     const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                     double q_star = 0.0);

/// Proportional-derivative controller with potential compensation for the
/// pendulum: u = -m g r sin q - k q - k_p (q - q*) - k_d p / J.
/// The proportional term uses the stabilizing sign.
struct PdPlusController {
  double k_p = 0.0;
  double k_d = 0.0;
  double q_star = 0.0;
  PendulumParams plant;

  void validate() const;  // gains nonnegative
};

double pd_plus_control(const PdPlusController& c, double q, double p);

/// Closed-form energy-balancing feedback
/// beta(x) = -g^+(x) F^T(x) (grad_H_star(x) - grad_H(x)), with g^+ the left
/// pseudo-inverse of the input map. Throws when g is column rank deficient.
/// Callers should gate on matching_residual(x) = 0; the formula is only a
/// shaping control where the desired energy is admissible.
Eigen::VectorXd ebpbc_beta(
    const PHSystem& sys,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_H_star,
    const Eigen::VectorXd& x);

/// Negative output feedback v = -K y; K must be symmetric positive
/// semidefinite so that the supplied power <y, v> is never positive.
Eigen::VectorXd damping_injection(const Eigen::MatrixXd& K, const Eigen::VectorXd& y);

/// Checkpoint on disk: a JSON metadata record (type, plant, horizon,
/// architecture, gains) next to one parameter file per network in the
/// binary ParamVector format. `path` names the JSON file; parameter files
/// live alongside it with suffixes `_potential.params`, `_gain.params`.
struct Checkpoint {
  enum class Type { Oes, PdPlus } type = Type::Oes;
  PendulumParams plant;
  OesController oes;    // valid when type == Oes
  PdPlusController pd;  // valid when type == PdPlus
};

void save_checkpoint(const std::string& json_path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& json_path);

}  // namespace oes
