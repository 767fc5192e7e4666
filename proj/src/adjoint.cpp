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

#include "oes/adjoint.hpp"

#include <cmath>
#include <stdexcept>

#include "oes/util.hpp"

namespace oes {

void AdjointProblem::validate() const {
  if (state_dim <= 0) throw std::invalid_argument("state_dim must be positive");
  if (param_count < 0) throw std::invalid_argument("param_count must be nonnegative");
  if (!f) throw std::invalid_argument("field f is required");
  if (!terminal_cost || !terminal_grad_state) {
    throw std::invalid_argument("terminal cost and its state gradient are required");
  }
  if (running_cost && !running_grad_state) {
    throw std::invalid_argument("running cost needs running_grad_state");
  }
  if (!backward_fused && (!vjp_state || !vjp_params)) {
    throw std::invalid_argument("either backward_fused or both vjp callbacks are required");
  }
  if (metric_count > 0 && !metric_rates) {
    throw std::invalid_argument("metric_count > 0 needs metric_rates");
  }
  solver.validate();
}

namespace {

// forward state layout: [x (n); running accumulator (1); metrics (m)]
Eigen::VectorXd forward_initial(const AdjointProblem& p, const Eigen::VectorXd& x0) {
  Eigen::VectorXd aug = Eigen::VectorXd::Zero(p.state_dim + 1 + p.metric_count);
  aug.head(p.state_dim) = x0;
  return aug;
}

OdeField forward_field(const AdjointProblem& p) {
  return [&p](double t, Eigen::Ref<const Eigen::VectorXd> aug,
              Eigen::Ref<Eigen::VectorXd> daug) {
    const Eigen::VectorXd x = aug.head(p.state_dim);
    p.f(t, x, daug.head(p.state_dim));
    daug[p.state_dim] = p.running_cost ? p.running_cost(t, x) : 0.0;
    if (p.metric_count > 0) {
      p.metric_rates(t, x, daug.tail(p.metric_count));
    }
  };
}

}  // namespace

LossResult loss(const AdjointProblem& problem, const Eigen::VectorXd& x0,
                bool dense_output) {
  problem.validate();
  if (x0.size() != problem.state_dim) {
    throw std::invalid_argument("initial state has wrong dimension");
  }
  if (!x0.allFinite()) throw std::invalid_argument("initial state is not finite");

  const OdeField field = forward_field(problem);
  Trajectory aug = dopri5_integrate(field, forward_initial(problem, x0), problem.t0,
                                    problem.t1, problem.solver, dense_output);

  LossResult out;
  const Eigen::VectorXd& final_aug = aug.final_state();
  const Eigen::VectorXd xT = final_aug.head(problem.state_dim);
  out.terminal = problem.terminal_cost(xT);
  out.running = final_aug[problem.state_dim];
  out.total = out.terminal + out.running;
  out.metrics = final_aug.tail(problem.metric_count);

  // strip accumulators so the reported trajectory is the raw state
  out.trajectory.times = std::move(aug.times);
  out.trajectory.states.reserve(aug.states.size());
  for (const auto& s : aug.states) {
    out.trajectory.states.push_back(s.head(problem.state_dim));
  }
  if (dense_output) {
    out.trajectory.segments.reserve(aug.segments.size());
    for (auto& seg : aug.segments) {
      DenseSegment cut;
      cut.t_start = seg.t_start;
      cut.h = seg.h;
      cut.coeff = seg.coeff.topRows(problem.state_dim);
      out.trajectory.segments.push_back(std::move(cut));
    }
  }
  return out;
}

GradResult grad(const AdjointProblem& problem, const Eigen::VectorXd& x0,
                const GradOptions& options) {
  problem.validate();
  if (x0.size() != problem.state_dim) {
    throw std::invalid_argument("initial state has wrong dimension");
  }

  // Forward pass; dense only when the costate solve will read states from it.
  const LossResult fwd = loss(problem, x0, options.checkpoint_states);
  const Eigen::VectorXd xT = fwd.trajectory.final_state();

  const int n = problem.state_dim;
  const int n_theta = problem.param_count;

  // backward state layout: [x (n); lambda (n); accumulator (n_theta)]
  // The accumulator integrates the costate-weighted parameter sensitivity
  // from t backwards to t1, so at t0 it holds the full integral term.
  Eigen::VectorXd back0(2 * n + n_theta);
  back0.head(n) = xT;
  back0.segment(n, n) = problem.terminal_grad_state(xT);
  back0.tail(n_theta).setZero();

  Eigen::VectorXd scratch_dx(n), scratch_dlam(n), scratch_dacc(n_theta);
  const bool use_fused = static_cast<bool>(problem.backward_fused);

  OdeField backward_field = [&](double t, Eigen::Ref<const Eigen::VectorXd> aug,
                                Eigen::Ref<Eigen::VectorXd> daug) {
    Eigen::Ref<const Eigen::VectorXd> lam = aug.segment(n, n);
    Eigen::VectorXd x;
    if (options.checkpoint_states) {
      x = fwd.trajectory.value_at(t);
    } else {
      x = aug.head(n);
    }
    if (use_fused) {
      problem.backward_fused(t, x, lam, scratch_dx, scratch_dlam, scratch_dacc);
      daug.head(n) = scratch_dx;
      daug.segment(n, n) = scratch_dlam;
      daug.tail(n_theta) = -scratch_dacc;
    } else {
      problem.f(t, x, daug.head(n));
      Eigen::VectorXd dlam = -problem.vjp_state(t, x, lam);
      Eigen::VectorXd dacc = problem.vjp_params(t, x, lam);
      if (problem.running_cost) {
        dlam -= problem.running_grad_state(t, x);
        if (problem.running_grad_params) dacc += problem.running_grad_params(t, x);
      }
      daug.segment(n, n) = dlam;
      daug.tail(n_theta) = -dacc;
    }
  };

  const Trajectory back = dopri5_integrate(backward_field, back0, problem.t1,
                                           problem.t0, problem.solver, false);

  GradResult out;
  out.total = fwd.total;
  out.terminal = fwd.terminal;
  out.running = fwd.running;
  out.metrics = fwd.metrics;
  const Eigen::VectorXd& final_back = back.final_state();
  out.gradient = final_back.tail(n_theta);
  if (problem.terminal_grad_params) {
    out.gradient += problem.terminal_grad_params(xT);
  }
  out.reconstruction_error = reconstruction_gap(final_back.head(n), x0);
  if (!options.checkpoint_states && out.reconstruction_error > kReconstructionGuard) {
    throw std::runtime_error(
        "backward state reconstruction diverged (weighted gap " +
        format_g17(out.reconstruction_error) +
        "); the dynamics are not reversible at this tolerance, consider "
        "checkpoint_states");
  }
  return out;
}

Eigen::VectorXd fd_grad(const ProblemFactory& factory, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& x0, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be positive");
  Eigen::VectorXd g(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double hi = h * std::max(1.0, std::abs(theta[i]));
    probe[i] = theta[i] + hi;
    const double plus = loss(factory(probe), x0).total;
    probe[i] = theta[i] - hi;
    const double minus = loss(factory(probe), x0).total;
    probe[i] = theta[i];
    g[i] = (plus - minus) / (2.0 * hi);
  }
  return g;
}

double reconstruction_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double q = (a[i] - b[i]) / (1.0 + std::abs(b[i]));
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace oes
