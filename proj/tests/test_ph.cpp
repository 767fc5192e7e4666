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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oes/mlp.hpp"
#include "oes/ode.hpp"
#include "oes/ph.hpp"

using namespace oes;

namespace {

constexpr double kPi = std::numbers::pi;

PHSystem pendulum_system() {
  PendulumParams params;
  return params.to_mechanical().to_ph_system();
}

Eigen::VectorXd state(double q, double p) { return Eigen::Vector2d(q, p); }
Eigen::VectorXd input(double u) { return Eigen::VectorXd::Constant(1, u); }

}  // namespace

TEST_CASE("pendulum vector field hits hand-computed values") {
  const PHSystem sys = pendulum_system();

  CHECK(vector_field(sys, state(0, 0), input(0)).norm() == 0.0);

  // at q = pi/2, p = 0: dq = 0, dp = -(m g r sin(pi/2) + k pi/2)
  const Eigen::VectorXd f1 = vector_field(sys, state(kPi / 2, 0), input(0));
  CHECK(f1[0] == 0.0);
  CHECK(f1[1] == doctest::Approx(-(9.81 + 0.5 * kPi / 2)).epsilon(1e-12));
  CHECK(f1[1] == doctest::Approx(-10.5954).epsilon(1e-4));

  // at q = 0, p = 1: dq = p/J = 1, dp = -beta p/J = -0.01
  const Eigen::VectorXd f2 = vector_field(sys, state(0, 1), input(0));
  CHECK(f2[0] == doctest::Approx(1.0));
  CHECK(f2[1] == doctest::Approx(-0.01));

  CHECK_THROWS_AS(vector_field(sys, Eigen::VectorXd::Zero(3), input(0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(vector_field(sys, state(0, 0), Eigen::VectorXd::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("passive output is the joint velocity") {
  const PHSystem sys = pendulum_system();
  CHECK(passive_output(sys, state(1.7, 0.0))[0] == 0.0);
  CHECK(passive_output(sys, state(0.0, 2.0))[0] == doctest::Approx(2.0));
  CHECK(passive_output(sys, state(1.0, -0.5))[0] == doctest::Approx(-0.5));
}

TEST_CASE("pendulum energy values") {
  PendulumParams params;
  CHECK(params.hamiltonian(0, 0) == 0.0);
  CHECK(params.hamiltonian(kPi, 0) ==
        doctest::Approx(19.62 + 2.4674).epsilon(1e-4));  // 22.0874
  CHECK(params.hamiltonian(0, 1) == doctest::Approx(0.5));

  const MechanicalPH mech = params.to_mechanical();
  CHECK(mech.hamiltonian(Eigen::VectorXd::Constant(1, kPi), Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(params.hamiltonian(kPi, 0)));
}

TEST_CASE("power balance: lossless conserves, friction dissipates") {
  PendulumParams lossless;
  lossless.beta = 0.0;
  const PHSystem cons = lossless.to_mechanical().to_ph_system();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0 * kPi, 2.0 * kPi);
  for (int i = 0; i < 50; ++i) {
    CHECK(std::abs(power_balance_residual(cons, state(u(rng), u(rng)), input(u(rng)))) <
          1e-12);
  }

  const PHSystem sys = pendulum_system();
  CHECK(power_balance_residual(sys, state(0, 1), input(0)) == doctest::Approx(-0.01));
  for (int i = 0; i < 20; ++i) {
    CHECK(power_balance_residual(sys, state(u(rng), 0.0), input(u(rng))) ==
          doctest::Approx(0.0).epsilon(1e-14));
  }

  // passivity over the sampled training domain
  for (int i = 0; i < 1000; ++i) {
    CHECK(power_balance_residual(sys, state(u(rng), u(rng)), input(u(rng))) <= 1e-14);
  }
}

TEST_CASE("matching residual separates admissible from inadmissible shaping") {
  PendulumParams params;
  const MechanicalPH mech = params.to_mechanical();
  const PHSystem sys = mech.to_ph_system();
  const Eigen::MatrixXd annihilator = mech.annihilator();

  // identical energies match trivially
  const auto residual_same = matching_residual(sys, sys.energy_grad, annihilator,
                                               state(0.7, -0.3));
  CHECK(residual_same.norm() == 0.0);

  // adding any configuration-only potential keeps the equations satisfied;
  // use a random small network as the added potential
  MlpSpec vspec;
  vspec.input_dim = 1;
  vspec.output_dim = 1;
  vspec.hidden_widths = {16};
  vspec.hidden_activations = {Activation::Tanh};
  std::mt19937_64 rng(17);
  ParamVector vtheta = xavier_init(vspec, rng);
  std::uniform_real_distribution<double> u(-2.0 * kPi, 2.0 * kPi);
  for (Eigen::Index i = 0; i < vtheta.size(); ++i) vtheta[i] += 0.1;

  const auto grad_shaped = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = sys.energy_grad(x);
    g[0] += mlp_grad_input(vspec, vtheta, x.head(1))(0, 0);
    return g;
  };
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = state(u(rng), u(rng));
    CHECK(matching_residual(sys, grad_shaped, annihilator, x).cwiseAbs().maxCoeff() <
          1e-12);
    // the generic kernel-built annihilator agrees
    CHECK(matching_residual(sys, grad_shaped, x).cwiseAbs().maxCoeff() < 1e-12);
  }

  // momentum-dependent shaping violates the reduced condition
  const auto grad_momentum = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = sys.energy_grad(x);
    g[1] += x[1];  // shaped energy H + p^2/2
    return g;
  };
  CHECK(matching_residual(sys, grad_momentum, annihilator, state(0, 1)).norm() > 0.1);

  // a rank-deficient annihilator is rejected
  CHECK_THROWS_AS(matching_residual(sys, grad_shaped,
                                    Eigen::MatrixXd::Zero(1, 2), state(0, 1)),
                  std::invalid_argument);
  // so is one that does not annihilate g
  Eigen::MatrixXd bad(1, 2);
  bad << 0.5, 1.0;
  CHECK_THROWS_AS(matching_residual(sys, grad_shaped, bad, state(0, 1)),
                  std::invalid_argument);
}

TEST_CASE("configuration-dependent inertia feeds the energy gradient") {
  // single coordinate with M(q) = J0 (1 + 0.5 sin^2 q)
  MechanicalPH mech;
  mech.n_q = 1;
  mech.inertia = [](const Eigen::VectorXd& q) {
    return Eigen::MatrixXd::Constant(1, 1, 2.0 * (1.0 + 0.5 * std::sin(q[0]) * std::sin(q[0])));
  };
  mech.inertia_grad = [](const Eigen::VectorXd& q) {
    return std::vector<Eigen::MatrixXd>{
        Eigen::MatrixXd::Constant(1, 1, 2.0 * std::sin(q[0]) * std::cos(q[0]))};
  };
  mech.potential = [](const Eigen::VectorXd& q) { return 0.5 * q[0] * q[0]; };
  mech.potential_grad = [](const Eigen::VectorXd& q) {
    return Eigen::VectorXd::Constant(1, q[0]);
  };
  mech.damping = Eigen::MatrixXd::Zero(1, 1);
  mech.input_matrix = Eigen::MatrixXd::Identity(1, 1);

  const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, 0.8);
  const Eigen::VectorXd p = Eigen::VectorXd::Constant(1, 1.3);
  const Eigen::VectorXd grad = mech.hamiltonian_grad(q, p);

  const double h = 1e-6;
  const double dq_fd = (mech.hamiltonian(q.array() + h, p) -
                        mech.hamiltonian(q.array() - h, p)) /
                       (2.0 * h);
  const double dp_fd = (mech.hamiltonian(q, p.array() + h) -
                        mech.hamiltonian(q, p.array() - h)) /
                       (2.0 * h);
  CHECK(grad[0] == doctest::Approx(dq_fd).epsilon(1e-8));
  CHECK(grad[1] == doctest::Approx(dp_fd).epsilon(1e-8));
}

TEST_CASE("rk4 trajectories of the lossless pendulum conserve energy at fourth order") {
  PendulumParams params;
  params.beta = 0.0;
  const PHSystem sys = params.to_mechanical().to_ph_system();
  const OdeField f = [&sys](double, Eigen::Ref<const Eigen::VectorXd> x,
                            Eigen::Ref<Eigen::VectorXd> dx) {
    dx = vector_field(sys, x, Eigen::VectorXd::Zero(1));
  };
  const Eigen::Vector2d x0(1.5, 0.5);
  const double h0 = params.hamiltonian(x0[0], x0[1]);
  auto drift = [&](long n) {
    const auto traj = rk4_integrate(f, x0, 0.0, 2.0, n);
    return std::abs(params.hamiltonian(traj.final_state()[0], traj.final_state()[1]) -
                    h0);
  };
  const double ratio = drift(200) / drift(400);
  CHECK(ratio > 10.0);
  CHECK(ratio < 26.0);
}

TEST_CASE("structure validation catches bad plants") {
  PendulumParams params;
  params.m = -1.0;
  CHECK_THROWS_AS(params.validate(), std::invalid_argument);
  params = PendulumParams{};
  params.beta = -0.1;
  CHECK_THROWS_AS(params.validate(), std::invalid_argument);
  params = PendulumParams{};
  params.beta = 0.0;
  CHECK_NOTHROW(params.validate());

  MechanicalPH mech = PendulumParams{}.to_mechanical();
  mech.damping = Eigen::MatrixXd::Constant(1, 1, 0.5);  // positive: injects energy
  CHECK_THROWS_AS(mech.validate(), std::invalid_argument);

  mech = PendulumParams{}.to_mechanical();
  mech.input_matrix = Eigen::MatrixXd::Zero(1, 1);
  CHECK_THROWS_AS(mech.validate(), std::invalid_argument);

  // singular inertia surfaces as an error in the energy
  mech = PendulumParams{}.to_mechanical();
  mech.inertia = [](const Eigen::VectorXd&) { return Eigen::MatrixXd::Zero(1, 1); };
  CHECK_THROWS_AS(mech.hamiltonian(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)),
                  std::invalid_argument);
}
