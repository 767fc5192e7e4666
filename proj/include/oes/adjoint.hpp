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

#include "oes/ode.hpp"

namespace oes {

/// A parametric trajectory-cost problem
///
///   cost(x0) = L(x(T)) + integral of l(t, x) over [t0, T],
///   dx/dt = f(t, x),
///
/// where f, l and L depend on parameters captured inside the callbacks.
/// The partial-derivative actions below are what the costate recursion
/// needs; all of them are exact analytic maps, never finite differences.
struct AdjointProblem {
  int state_dim = 0;
  int param_count = 0;
  double t0 = 0.0;
  double t1 = 1.0;
  SolverConfig solver;

  OdeField f;

  /// l(t, x); null means no running cost.
  std::function<double(double, const Eigen::VectorXd&)> running_cost;
  /// dl/dx as a vector; required when running_cost is set.
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> running_grad_state;
  /// dl/dtheta; null means the running cost does not see the parameters.
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)> running_grad_params;

  std::function<double(const Eigen::VectorXd&)> terminal_cost;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> terminal_grad_state;
  /// dL/dtheta; null means zero.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> terminal_grad_params;

  /// lambda^T df/dx at (t, x) as a vector of length state_dim.
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>
      vjp_state;
  /// lambda^T df/dtheta at (t, x) as a vector of length param_count.
  std::function<Eigen::VectorXd(double, const Eigen::VectorXd&, const Eigen::VectorXd&)>
      vjp_params;

  /// Optional fused backward right-hand side. When set, the costate solve
  /// uses this instead of composing the four callbacks above, letting an
  /// implementation share one evaluation of the underlying networks:
  ///   dx   = f(t, x)
  ///   dlam = -lambda^T df/dx - dl/dx
  ///   dacc = lambda^T df/dtheta + dl/dtheta
  std::function<void(double, Eigen::Ref<const Eigen::VectorXd> x,
                     Eigen::Ref<const Eigen::VectorXd> lambda,
                     Eigen::Ref<Eigen::VectorXd> dx, Eigen::Ref<Eigen::VectorXd> dlam,
                     Eigen::Ref<Eigen::VectorXd> dacc)>
      backward_fused;

  /// Extra integrands accumulated on the forward solve for reporting (for
  /// example the exact control effort). They never influence gradients.
  int metric_count = 0;
  std::function<void(double, const Eigen::VectorXd&, Eigen::Ref<Eigen::VectorXd>)>
      metric_rates;

  void validate() const;
};

struct LossResult {
  double total = 0.0;     ///< L(x(T)) + integral of l
  double terminal = 0.0;  ///< L(x(T))
  double running = 0.0;   ///< integral of l
  Eigen::VectorXd metrics;
  Trajectory trajectory;  ///< forward path of the raw state
};

/// Forward solve of the state augmented with the running-cost accumulator
/// (and any metric accumulators). Dense output is stored on request.
LossResult loss(const AdjointProblem& problem, const Eigen::VectorXd& x0,
                bool dense_output = false);

struct GradOptions {
  /// When true the forward pass stores a dense trajectory and the costate
  /// solve reads x(t) from it instead of re-integrating the state backward.
  /// Costs O(steps) memory; useful when the dynamics are not numerically
  /// reversible at the working tolerance.
  bool checkpoint_states = false;
};

struct GradResult {
  double total = 0.0;
  double terminal = 0.0;
  double running = 0.0;
  Eigen::VectorXd metrics;
  Eigen::VectorXd gradient;            ///< d(total)/d(params)
  double reconstruction_error = 0.0;   ///< weighted gap |x_backward(t0) - x0|
};

/// Exact cost gradient by the costate method: one forward solve, then one
/// backward solve of (x, lambda, accumulator) from t1 to t0 with
/// lambda(t1) = dL/dx(T). Memory stays O(1) in the step count because the
/// state is re-integrated backward alongside the costate. Throws
/// SolverError on integration failure and std::runtime_error when the
/// backward state reconstruction drifts past the irreversibility guard.
GradResult grad(const AdjointProblem& problem, const Eigen::VectorXd& x0,
                const GradOptions& options = {});

/// Rebuilds a problem at given parameters; how finite differencing varies
/// the parameters the closures capture.
using ProblemFactory = std::function<AdjointProblem(const Eigen::VectorXd& theta)>;

/// Central finite-difference gradient, one pair of forward solves per
/// parameter with step h_i = h * max(1, |theta_i|). Independent of the
/// costate path; the verification oracle for grad().
Eigen::VectorXd fd_grad(const ProblemFactory& factory, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& x0, double h);

/// Weighted norm used by the irreversibility guard:
/// sqrt(mean((a_i - b_i)^2 / (1 + |b_i|)^2)).
double reconstruction_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Backward state reconstruction beyond this gap raises an error.
inline constexpr double kReconstructionGuard = 1e-3;

}  // namespace oes
