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
#include <stdexcept>
#include <string>
#include <vector>

namespace oes {

/// Right-hand side of an ODE: writes dx/dt at (t, x) into dx.
using OdeField = std::function<void(double t, Eigen::Ref<const Eigen::VectorXd> x,
                                    Eigen::Ref<Eigen::VectorXd> dx)>;

struct SolverConfig {
  double rtol = 1e-6;
  double atol = 1e-6;
  double initial_step = 0.0;  ///< seconds; 0 selects the step automatically
  long max_steps = 200000;
  double safety = 0.9;
  double min_scale = 0.2;   ///< largest allowed step shrink factor per step
  double max_scale = 10.0;  ///< largest allowed step growth factor per step
  double beta = 0.04;       ///< PI controller stabilization exponent

  void validate() const;  // throws std::invalid_argument
};

/// Integration failure (step underflow, step budget exhausted, or a
/// non-finite right-hand side). Carries where the solver gave up.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double t, double step, long steps_taken)
      : std::runtime_error(what), t(t), step(step), steps_taken(steps_taken) {}
  double t = 0.0;
  double step = 0.0;
  long steps_taken = 0;
};

/// One accepted step's dense-output coefficients; evaluated through
/// Trajectory::value_at.
struct DenseSegment {
  double t_start = 0.0;
  double h = 0.0;
  Eigen::MatrixXd coeff;  // state_dim x 5 interpolation coefficients
};

/// Time grid and states from one integration. Times are strictly monotone
/// in the direction of integration (decreasing for backward solves).
struct Trajectory {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<DenseSegment> segments;  // filled only when dense output was requested

  int state_dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }
  double t_begin() const { return times.front(); }
  double t_end() const { return times.back(); }
  const Eigen::VectorXd& final_state() const { return states.back(); }
  bool has_dense() const { return !segments.empty(); }

  /// Fifth-order interpolant evaluation; requires dense output and
  /// t inside the integrated span.
  Eigen::VectorXd value_at(double t) const;
};

/// Adaptive Dormand-Prince 5(4) integration of f from (t0, x0) to t1
/// (either direction). Steps are accepted when the embedded error estimate
/// err = rms_i(e_i / (atol + rtol*max(|x_i|, |x_next_i|))) is at most one;
/// the next step is chosen by a PI controller. The first step, when not
/// given, follows the standard starting-step heuristic.
Trajectory dopri5_integrate(const OdeField& f, const Eigen::VectorXd& x0, double t0,
                            double t1, const SolverConfig& cfg,
                            bool dense_output = false);

/// Classical fixed-step RK4 on an explicit time grid; the independent
/// cross-check for the adaptive solver.
Trajectory rk4_integrate(const OdeField& f, const Eigen::VectorXd& x0,
                         const std::vector<double>& t_grid);

/// RK4 on a uniform grid with n_steps intervals.
Trajectory rk4_integrate(const OdeField& f, const Eigen::VectorXd& x0, double t0,
                         double t1, long n_steps);

/// Writes `t,x0,x1,...` rows (17 significant digits). When a control law is
/// supplied an extra column is appended, headed `u` for scalar controls and
/// `u0,u1,...` otherwise.
void write_trajectory_csv(
    const std::string& path, const Trajectory& traj,
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& control = nullptr);

}  // namespace oes
