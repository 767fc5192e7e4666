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

#include <functional>
#include <vector>

namespace oes {

/// Input-state-output port-Hamiltonian system
///
///   dx/dt = F(x) grad_H(x) + g(x) u,     y = g(x)^T grad_H(x)
///
/// with F + F^T negative semidefinite. The energy gradient is supplied
/// analytically; nothing in here differentiates numerically. All members
/// are immutable maps, so systems are safe to evaluate concurrently.
struct PHSystem {
  int state_dim = 0;
  int input_dim = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> interconnection;  ///< F(x)
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> input_map;        ///< g(x)
  std::function<double(const Eigen::VectorXd&)> energy;                    ///< H(x)
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> energy_grad;      ///< grad H(x)
};

/// dx/dt = F(x) grad_H(x) + g(x) u. Throws on dimension mismatch.
Eigen::VectorXd vector_field(const PHSystem& sys, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u);

/// y = g(x)^T grad_H(x); for the mechanical form this equals B qdot.
Eigen::VectorXd passive_output(const PHSystem& sys, const Eigen::VectorXd& x);

/// dH/dt - <y, u>, evaluated literally as <grad_H, F grad_H + g u> - <y, u>.
/// Nonpositive for any passive system; the supplied-power term cancels
/// analytically, so this doubles as a numerical check of that cancellation.
double power_balance_residual(const PHSystem& sys, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u);

/// Stacked residual [g_perp(x) F(x)^T; g(x)^T] (grad_H_star(x) - grad_H(x))
/// of the conditions a desired energy must satisfy to be assignable by
/// state feedback. Zero (for all x) iff the shaped energy is admissible.
/// The annihilator must have full row rank and satisfy g_perp g = 0.
Eigen::VectorXd matching_residual(
    const PHSystem& sys,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_H_star,
    const Eigen::MatrixXd& annihilator, const Eigen::VectorXd& x);

/// As above with the annihilator constructed from the left kernel of g(x).
Eigen::VectorXd matching_residual(
    const PHSystem& sys,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_H_star,
    const Eigen::VectorXd& x);

/// Mechanical system in canonical coordinates x = (q, p):
///
///   [dq; dp] = [[0, I], [-I, D]] [grad_q H; grad_p H] + [0; B] u
///   H(q, p)  = p^T M(q)^{-1} p / 2 + V(q)
///
/// with M symmetric positive definite, D = D^T <= 0 and B invertible.
struct MechanicalPH {
  int n_q = 0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> inertia;         ///< M(q)
  std::function<double(const Eigen::VectorXd&)> potential;                ///< V(q)
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> potential_grad;  ///< grad V(q)
  /// Optional dM/dq_i per coordinate; leave empty for configuration
  /// independent inertia.
  std::function<std::vector<Eigen::MatrixXd>(const Eigen::VectorXd&)> inertia_grad;
  Eigen::MatrixXd damping;       ///< D
  Eigen::MatrixXd input_matrix;  ///< B

  /// p^T M^{-1} p / 2 + V(q). Throws if M is singular.
  double hamiltonian(const Eigen::VectorXd& q, const Eigen::VectorXd& p) const;

  /// (grad_q H, grad_p H) stacked.
  Eigen::VectorXd hamiltonian_grad(const Eigen::VectorXd& q,
                                   const Eigen::VectorXd& p) const;

  /// The induced input-state-output form (block F and g above).
  PHSystem to_ph_system() const;

  /// Canonical left annihilator [I 0] of g = [0; B], valid since B is
  /// invertible. Products with it are exact in floating point.
  Eigen::MatrixXd annihilator() const;

  void validate() const;  // shape and sign checks, throws std::invalid_argument
};

/// Torsional pendulum with an elastic joint and viscous friction:
/// V(q) = m g r (1 - cos q) + k q^2 / 2, M = J, D = -beta, B = 1.
/// The configuration coordinate is treated as a plain real number (global
/// chart), matching the training domain used throughout.
struct PendulumParams {
  double m = 1.0;        ///< mass [kg]
  double r = 1.0;        ///< center-of-mass distance [m]
  double k = 0.5;        ///< torsional stiffness [N/rad]
  double beta = 0.01;    ///< viscous coefficient [N s/rad]
  double J = 1.0;        ///< inertia [kg m^2]
  double gravity = 9.81; ///< [m/s^2]

  void validate() const;  // all positive, beta >= 0

  double potential(double q) const;
  double potential_grad(double q) const;
  double potential_hessian(double q) const;
  double hamiltonian(double q, double p) const;

  MechanicalPH to_mechanical() const;
};

}  // namespace oes
