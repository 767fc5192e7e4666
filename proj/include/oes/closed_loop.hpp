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

#include <memory>

#include "oes/adjoint.hpp"
#include "oes/controller.hpp"
#include "oes/ph.hpp"

namespace oes {

/// Cost terms for one rollout of the controlled pendulum.
struct RolloutCost {
  enum class Terminal { GaussianNll, Quadratic };
  Terminal terminal = Terminal::GaussianNll;

  // GaussianNll: -log density of N((q_star, 0), sigma2 I) at x(T)
  double q_star = 0.0;
  double sigma2 = 1e-3;

  // Quadratic: (x(T) - target)^T diag(weights) (x(T) - target)
  Eigen::Vector2d target{0.0, 0.0};
  Eigen::Vector2d weights{10.0, 1.0};

  /// Effort integrand on u. SmoothedAbs integrates
  /// sqrt(u^2 + eps^2) - eps during training (the exact |u| is reported
  /// through a metric accumulator); HalfSquare integrates u^2 / 2.
  enum class Effort { SmoothedAbs, HalfSquare };
  Effort effort = Effort::SmoothedAbs;
  double effort_weight = 0.01;
  double smoothing_eps = 1e-6;
};

/// Scalar control law for the pendulum together with the partial
/// derivatives the costate solve needs. eval() retains internal tapes that
/// fill_param_grad() reuses, so one instance serves one thread.
class PendulumLaw {
 public:
  virtual ~PendulumLaw() = default;
  virtual int param_count() const = 0;
  virtual Eigen::VectorXd params() const = 0;
  virtual void set_params(const Eigen::VectorXd& theta) = 0;
  /// Control value only (forward rollouts and metrics).
  virtual double control(double t, double q, double p) = 0;
  /// Control value plus state partials at (t, q, p).
  virtual void eval(double t, double q, double p, double& u, double& du_dq,
                    double& du_dp) = 0;
  /// Writes weight * du/dtheta into out; valid right after eval() at the
  /// same point.
  virtual void fill_param_grad(double weight, Eigen::Ref<Eigen::VectorXd> out) = 0;
};

/// Energy-shaping law u = -dVstar/dq - K(.) p/J with exact network partials.
class OesLaw : public PendulumLaw {
 public:
  OesLaw(const OesController& controller, const PendulumParams& plant,
         double q_star = 0.0);

  int param_count() const override;
  Eigen::VectorXd params() const override;
  void set_params(const Eigen::VectorXd& theta) override;
  double control(double t, double q, double p) override;
  void eval(double t, double q, double p, double& u, double& du_dq,
            double& du_dp) override;
  void fill_param_grad(double weight, Eigen::Ref<Eigen::VectorXd> out) override;

  const OesController& controller() const { return controller_; }

 private:
  OesController controller_;
  double inv_inertia_;
  double q_star_;
  double p_over_J_ = 0.0;
  MlpTape potential_tape_, gain_tape_;
  Eigen::VectorXd potential_in_, gain_in_, gain_cot_, potential_tan_;
};

/// Compensated PD law with parameters (k_p, k_d).
class PdPlusLaw : public PendulumLaw {
 public:
  PdPlusLaw(const PdPlusController& controller);

  int param_count() const override { return 2; }
  Eigen::VectorXd params() const override;
  void set_params(const Eigen::VectorXd& theta) override;
  double control(double t, double q, double p) override;
  void eval(double t, double q, double p, double& u, double& du_dq,
            double& du_dp) override;
  void fill_param_grad(double weight, Eigen::Ref<Eigen::VectorXd> out) override;

  const PdPlusController& controller() const { return controller_; }

 private:
  PdPlusController controller_;
  double q_ = 0.0, p_ = 0.0;
};

/// Assembles the trajectory-cost problem for the controlled pendulum over
/// [0, horizon]. The returned callbacks share the law instance; use one
/// problem (and law) per thread. One metric accumulator carries the exact
/// effort integral (|u| or u^2/2 to match the cost's effort kind).
AdjointProblem make_pendulum_problem(const PendulumParams& plant,
                                     std::shared_ptr<PendulumLaw> law,
                                     const RolloutCost& cost, double horizon,
                                     const SolverConfig& solver);

}  // namespace oes
