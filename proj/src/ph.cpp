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

#include "oes/ph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <stdexcept>

namespace oes {
namespace {

void check_state(const PHSystem& sys, const Eigen::VectorXd& x) {
  if (x.size() != sys.state_dim) {
    throw std::invalid_argument("state has dimension " + std::to_string(x.size()) +
                                ", system expects " + std::to_string(sys.state_dim));
  }
}

void check_input(const PHSystem& sys, const Eigen::VectorXd& u) {
  if (u.size() != sys.input_dim) {
    throw std::invalid_argument("input has dimension " + std::to_string(u.size()) +
                                ", system expects " + std::to_string(sys.input_dim));
  }
}

Eigen::MatrixXd solve_spd(const Eigen::MatrixXd& m, const Eigen::MatrixXd& rhs) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("inertia matrix is not positive definite");
  }
  return llt.solve(rhs);
}

}  // namespace

Eigen::VectorXd vector_field(const PHSystem& sys, const Eigen::VectorXd& x,
                             const Eigen::VectorXd& u) {
  check_state(sys, x);
  check_input(sys, u);
  return sys.interconnection(x) * sys.energy_grad(x) + sys.input_map(x) * u;
}

Eigen::VectorXd passive_output(const PHSystem& sys, const Eigen::VectorXd& x) {
  check_state(sys, x);
  return sys.input_map(x).transpose() * sys.energy_grad(x);
}

double power_balance_residual(const PHSystem& sys, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& u) {
  check_state(sys, x);
  check_input(sys, u);
  const Eigen::VectorXd grad = sys.energy_grad(x);
  const Eigen::VectorXd dx = sys.interconnection(x) * grad + sys.input_map(x) * u;
  const Eigen::VectorXd y = sys.input_map(x).transpose() * grad;
  return grad.dot(dx) - y.dot(u);
}

Eigen::VectorXd matching_residual(
    const PHSystem& sys,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_H_star,
    const Eigen::MatrixXd& annihilator, const Eigen::VectorXd& x) {
  check_state(sys, x);
  const Eigen::MatrixXd g = sys.input_map(x);
  if (annihilator.cols() != sys.state_dim) {
    throw std::invalid_argument("annihilator must have state_dim columns");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(annihilator);
  if (lu.rank() != annihilator.rows()) {
    throw std::invalid_argument("annihilator is row rank deficient");
  }
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (((annihilator * g).cwiseAbs().maxCoeff()) > 1e-10 * scale) {
    throw std::invalid_argument("annihilator does not annihilate the input map");
  }
  const Eigen::VectorXd diff = grad_H_star(x) - sys.energy_grad(x);
  Eigen::VectorXd residual(annihilator.rows() + sys.input_dim);
  residual.head(annihilator.rows()) =
      annihilator * (sys.interconnection(x).transpose() * diff);
  residual.tail(sys.input_dim) = g.transpose() * diff;
  return residual;
}

Eigen::VectorXd matching_residual(
    const PHSystem& sys,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_H_star,
    const Eigen::VectorXd& x) {
  check_state(sys, x);
  const Eigen::MatrixXd g = sys.input_map(x);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(g.transpose());
  if (lu.rank() != g.cols()) {
    throw std::invalid_argument("input map is column rank deficient");
  }
  // rows spanning the left kernel of g
  const Eigen::MatrixXd annihilator = lu.kernel().transpose();
  return matching_residual(sys, grad_H_star, annihilator, x);
}

double MechanicalPH::hamiltonian(const Eigen::VectorXd& q,
                                 const Eigen::VectorXd& p) const {
  const Eigen::VectorXd minv_p = solve_spd(inertia(q), p);
  return 0.5 * p.dot(minv_p) + potential(q);
}

Eigen::VectorXd MechanicalPH::hamiltonian_grad(const Eigen::VectorXd& q,
                                               const Eigen::VectorXd& p) const {
  Eigen::VectorXd grad(2 * n_q);
  const Eigen::VectorXd minv_p = solve_spd(inertia(q), p);
  grad.head(n_q) = potential_grad(q);
  if (inertia_grad) {
    const auto dM = inertia_grad(q);
    for (int i = 0; i < n_q; ++i) {
      grad[i] -= 0.5 * minv_p.dot(dM[static_cast<std::size_t>(i)] * minv_p);
    }
  }
  grad.tail(n_q) = minv_p;
  return grad;
}

PHSystem MechanicalPH::to_ph_system() const {
  validate();
  PHSystem sys;
  sys.state_dim = 2 * n_q;
  sys.input_dim = n_q;
  const int n = n_q;
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  F.topRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
  F.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  F.bottomRightCorner(n, n) = damping;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n, n);
  g.bottomRows(n) = input_matrix;
  sys.interconnection = [F](const Eigen::VectorXd&) { return F; };
  sys.input_map = [g](const Eigen::VectorXd&) { return g; };
  const MechanicalPH self = *this;
  sys.energy = [self, n](const Eigen::VectorXd& x) {
    return self.hamiltonian(x.head(n), x.tail(n));
  };
  sys.energy_grad = [self, n](const Eigen::VectorXd& x) {
    return self.hamiltonian_grad(x.head(n), x.tail(n));
  };
  return sys;
}

Eigen::MatrixXd MechanicalPH::annihilator() const {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n_q, 2 * n_q);
  a.leftCols(n_q) = Eigen::MatrixXd::Identity(n_q, n_q);
  return a;
}

void MechanicalPH::validate() const {
  if (n_q <= 0) throw std::invalid_argument("n_q must be positive");
  if (!inertia || !potential || !potential_grad) {
    throw std::invalid_argument("inertia, potential and potential_grad are required");
  }
  if (damping.rows() != n_q || damping.cols() != n_q) {
    throw std::invalid_argument("damping must be n_q x n_q");
  }
  if ((damping - damping.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("damping must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(damping);
  if (es.eigenvalues().maxCoeff() > 1e-12) {
    throw std::invalid_argument("damping must be negative semidefinite");
  }
  if (input_matrix.rows() != n_q || input_matrix.cols() != n_q) {
    throw std::invalid_argument("input matrix must be n_q x n_q");
  }
  if (std::abs(Eigen::FullPivLU<Eigen::MatrixXd>(input_matrix).determinant()) < 1e-12) {
    throw std::invalid_argument("input matrix must be invertible");
  }
}

void PendulumParams::validate() const {
  if (!(m > 0.0 && r > 0.0 && k > 0.0 && J > 0.0 && gravity > 0.0)) {
    throw std::invalid_argument("pendulum parameters must be strictly positive");
  }
  if (beta < 0.0) throw std::invalid_argument("viscous coefficient must be nonnegative");
}

double PendulumParams::potential(double q) const {
  return m * gravity * r * (1.0 - std::cos(q)) + 0.5 * k * q * q;
}

double PendulumParams::potential_grad(double q) const {
  return m * gravity * r * std::sin(q) + k * q;
}

double PendulumParams::potential_hessian(double q) const {
  return m * gravity * r * std::cos(q) + k;
}

double PendulumParams::hamiltonian(double q, double p) const {
  return 0.5 * p * p / J + potential(q);
}

MechanicalPH PendulumParams::to_mechanical() const {
  validate();
  MechanicalPH mech;
  mech.n_q = 1;
  const PendulumParams self = *this;
  mech.inertia = [self](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, self.J);
  };
  mech.potential = [self](const Eigen::VectorXd& q) { return self.potential(q[0]); };
  mech.potential_grad = [self](const Eigen::VectorXd& q) {
    return Eigen::VectorXd::Constant(1, self.potential_grad(q[0]));
  };
  mech.damping = Eigen::MatrixXd::Constant(1, 1, -beta);
  mech.input_matrix = Eigen::MatrixXd::Identity(1, 1);
  return mech;
}

}  // namespace oes
