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

#include "oes/closed_loop.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oes {

OesLaw::OesLaw(const OesController& controller, const PendulumParams& plant,
               double q_star)
    : controller_(controller), inv_inertia_(1.0 / plant.J), q_star_(q_star) {
  controller_.validate();
  if (controller_.n_q() != 1) {
    throw std::invalid_argument("pendulum law needs a single-joint controller");
  }
  potential_in_.resize(controller_.potential_spec.input_dim);
  gain_in_.resize(controller_.gain_spec.input_dim);
  gain_cot_.resize(1);
  potential_tan_ = Eigen::VectorXd::Zero(controller_.potential_spec.input_dim);
}

int OesLaw::param_count() const { return controller_.param_count(); }

Eigen::VectorXd OesLaw::params() const { return controller_.packed_params(); }

void OesLaw::set_params(const Eigen::VectorXd& theta) {
  controller_.set_packed_params(theta);
}

double OesLaw::control(double t, double q, double p) {
  potential_in_[0] = q;
  if (controller_.setpoint_conditioned) potential_in_[1] = q_star_;
  mlp_forward_tape(controller_.potential_spec, controller_.theta_potential,
                   potential_in_, potential_tape_);
  const double grad_v =
      mlp_grad_input_tape(controller_.potential_spec, controller_.theta_potential,
                          potential_tape_)(0, 0);
  if (controller_.setpoint_conditioned) {
    gain_in_ << q, p, q_star_;
  } else {
    gain_in_ << t / controller_.horizon, q, p;
  }
  mlp_forward_tape(controller_.gain_spec, controller_.theta_gain, gain_in_, gain_tape_);
  return -grad_v - gain_tape_.out[0] * p * inv_inertia_;
}

void OesLaw::eval(double t, double q, double p, double& u, double& du_dq,
                  double& du_dp) {
  potential_in_[0] = q;
  if (controller_.setpoint_conditioned) potential_in_[1] = q_star_;
  mlp_forward_tape(controller_.potential_spec, controller_.theta_potential,
                   potential_in_, potential_tape_);
  const double grad_v =
      mlp_grad_input_tape(controller_.potential_spec, controller_.theta_potential,
                          potential_tape_)(0, 0);
  const double hess_v =
      mlp_input_hessian_tape(controller_.potential_spec, controller_.theta_potential,
                             potential_tape_)(0, 0);

  int iq, ip;
  if (controller_.setpoint_conditioned) {
    gain_in_ << q, p, q_star_;
    iq = 0;
    ip = 1;
  } else {
    gain_in_ << t / controller_.horizon, q, p;
    iq = 1;
    ip = 2;
  }
  mlp_forward_tape(controller_.gain_spec, controller_.theta_gain, gain_in_, gain_tape_);
  const Eigen::MatrixXd gain_jac =
      mlp_grad_input_tape(controller_.gain_spec, controller_.theta_gain, gain_tape_);

  const double gain = gain_tape_.out[0];
  p_over_J_ = p * inv_inertia_;
  u = -grad_v - gain * p_over_J_;
  du_dq = -hess_v - gain_jac(0, iq) * p_over_J_;
  du_dp = -gain_jac(0, ip) * p_over_J_ - gain * inv_inertia_;
}

void OesLaw::fill_param_grad(double weight, Eigen::Ref<Eigen::VectorXd> out) {
  const int n_pot = controller_.potential_spec.param_count();
  // du/dtheta_V = -d(dVstar/dq)/dtheta_V, applied through the scaled tangent
  potential_tan_[0] = -weight;
  mlp_grad_gradient_vjp_tape(controller_.potential_spec, controller_.theta_potential,
                             potential_tape_, potential_tan_, out.head(n_pot));
  // du/dtheta_K = -(p/J) dK/dtheta_K
  gain_cot_[0] = -weight * p_over_J_;
  mlp_vjp_params_tape(controller_.gain_spec, controller_.theta_gain, gain_tape_,
                      gain_cot_, out.tail(controller_.gain_spec.param_count()));
}

PdPlusLaw::PdPlusLaw(const PdPlusController& controller) : controller_(controller) {
  controller_.validate();
}

Eigen::VectorXd PdPlusLaw::params() const {
  Eigen::VectorXd theta(2);
  theta << controller_.k_p, controller_.k_d;
  return theta;
}

void PdPlusLaw::set_params(const Eigen::VectorXd& theta) {
  if (theta.size() != 2) throw std::invalid_argument("PD law has two parameters");
  controller_.k_p = theta[0];
  controller_.k_d = theta[1];
}

double PdPlusLaw::control(double /*t*/, double q, double p) {
  return pd_plus_control(controller_, q, p);
}

void PdPlusLaw::eval(double /*t*/, double q, double p, double& u, double& du_dq,
                     double& du_dp) {
  q_ = q;
  p_ = p;
  const auto& plant = controller_.plant;
  u = pd_plus_control(controller_, q, p);
  du_dq = -plant.m * plant.gravity * plant.r * std::cos(q) - plant.k - controller_.k_p;
  du_dp = -controller_.k_d / plant.J;
}

void PdPlusLaw::fill_param_grad(double weight, Eigen::Ref<Eigen::VectorXd> out) {
  out[0] = -weight * (q_ - controller_.q_star);
  out[1] = -weight * p_ / controller_.plant.J;
}

namespace {

double terminal_value(const RolloutCost& cost, const Eigen::VectorXd& x) {
  if (cost.terminal == RolloutCost::Terminal::GaussianNll) {
    const double eq = x[0] - cost.q_star;
    const double ep = x[1];
    return (eq * eq + ep * ep) / (2.0 * cost.sigma2) +
           std::log(2.0 * std::numbers::pi * cost.sigma2);
  }
  const Eigen::Vector2d e = x.head<2>() - cost.target;
  return cost.weights.dot(e.cwiseProduct(e));
}

Eigen::VectorXd terminal_gradient(const RolloutCost& cost, const Eigen::VectorXd& x) {
  Eigen::VectorXd g(2);
  if (cost.terminal == RolloutCost::Terminal::GaussianNll) {
    g[0] = (x[0] - cost.q_star) / cost.sigma2;
    g[1] = x[1] / cost.sigma2;
  } else {
    g = 2.0 * cost.weights.cwiseProduct(x.head<2>() - cost.target);
  }
  return g;
}

// effort integrand and its u-derivative, scaled by the effort weight
void effort_terms(const RolloutCost& cost, double u, double& value, double& slope) {
  if (cost.effort == RolloutCost::Effort::SmoothedAbs) {
    const double root = std::sqrt(u * u + cost.smoothing_eps * cost.smoothing_eps);
    value = cost.effort_weight * (root - cost.smoothing_eps);
    slope = cost.effort_weight * (u / root);
  } else {
    value = cost.effort_weight * 0.5 * u * u;
    slope = cost.effort_weight * u;
  }
}

}  // namespace

AdjointProblem make_pendulum_problem(const PendulumParams& plant,
                                     std::shared_ptr<PendulumLaw> law,
                                     const RolloutCost& cost, double horizon,
                                     const SolverConfig& solver) {
  plant.validate();
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (cost.effort_weight < 0.0) {
    throw std::invalid_argument("effort weight must be nonnegative");
  }

  AdjointProblem problem;
  problem.state_dim = 2;
  problem.param_count = law->param_count();
  problem.t0 = 0.0;
  problem.t1 = horizon;
  problem.solver = solver;

  problem.f = [plant, law](double t, Eigen::Ref<const Eigen::VectorXd> x,
                           Eigen::Ref<Eigen::VectorXd> dx) {
    const double q = x[0], p = x[1];
    const double u = law->control(t, q, p);
    dx[0] = p / plant.J;
    dx[1] = -plant.potential_grad(q) - plant.beta * p / plant.J + u;
  };

  problem.running_cost = [law, cost](double t, const Eigen::VectorXd& x) {
    double value, slope;
    effort_terms(cost, law->control(t, x[0], x[1]), value, slope);
    return value;
  };
  problem.running_grad_state = [plant, law, cost](double t, const Eigen::VectorXd& x) {
    double u, du_dq, du_dp;
    law->eval(t, x[0], x[1], u, du_dq, du_dp);
    double value, slope;
    effort_terms(cost, u, value, slope);
    Eigen::VectorXd g(2);
    g << slope * du_dq, slope * du_dp;
    return g;
  };
  problem.running_grad_params = [law, cost](double t, const Eigen::VectorXd& x) {
    double u, du_dq, du_dp;
    law->eval(t, x[0], x[1], u, du_dq, du_dp);
    double value, slope;
    effort_terms(cost, u, value, slope);
    Eigen::VectorXd g(law->param_count());
    law->fill_param_grad(slope, g);
    return g;
  };

  problem.terminal_cost = [cost](const Eigen::VectorXd& x) {
    return terminal_value(cost, x);
  };
  problem.terminal_grad_state = [cost](const Eigen::VectorXd& x) {
    return terminal_gradient(cost, x);
  };

  problem.vjp_state = [plant, law](double t, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& lam) {
    double u, du_dq, du_dp;
    law->eval(t, x[0], x[1], u, du_dq, du_dp);
    Eigen::VectorXd out(2);
    out[0] = lam[1] * (-plant.potential_hessian(x[0]) + du_dq);
    out[1] = lam[0] / plant.J + lam[1] * (-plant.beta / plant.J + du_dp);
    return out;
  };
  problem.vjp_params = [law](double t, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& lam) {
    double u, du_dq, du_dp;
    law->eval(t, x[0], x[1], u, du_dq, du_dp);
    Eigen::VectorXd out(law->param_count());
    law->fill_param_grad(lam[1], out);
    return out;
  };

  // Fused backward path: one law evaluation per right-hand-side call. The
  // costate weight on du/dtheta combines the field term (lambda_p) with the
  // running-cost term (dl/du), so a single parameter sweep serves both.
  problem.backward_fused = [plant, law, cost](double t,
                                              Eigen::Ref<const Eigen::VectorXd> x,
                                              Eigen::Ref<const Eigen::VectorXd> lam,
                                              Eigen::Ref<Eigen::VectorXd> dx,
                                              Eigen::Ref<Eigen::VectorXd> dlam,
                                              Eigen::Ref<Eigen::VectorXd> dacc) {
    const double q = x[0], p = x[1];
    double u, du_dq, du_dp;
    law->eval(t, q, p, u, du_dq, du_dp);
    dx[0] = p / plant.J;
    dx[1] = -plant.potential_grad(q) - plant.beta * p / plant.J + u;

    double value, slope;
    effort_terms(cost, u, value, slope);
    dlam[0] = -lam[1] * (-plant.potential_hessian(q) + du_dq) - slope * du_dq;
    dlam[1] = -lam[0] / plant.J - lam[1] * (-plant.beta / plant.J + du_dp) -
              slope * du_dp;
    law->fill_param_grad(lam[1] + slope, dacc);
  };

  // exact effort integral for reporting, independent of the smoothing
  problem.metric_count = 1;
  problem.metric_rates = [law, cost](double t, const Eigen::VectorXd& x,
                                     Eigen::Ref<Eigen::VectorXd> rates) {
    const double u = law->control(t, x[0], x[1]);
    rates[0] = cost.effort == RolloutCost::Effort::SmoothedAbs ? std::abs(u)
                                                               : 0.5 * u * u;
  };

  return problem;
}

}  // namespace oes
