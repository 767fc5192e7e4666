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

#include "oes/ode.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "oes/util.hpp"

namespace oes {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                 a75 = -2187.0 / 6784, a76 = 11.0 / 84;
// Difference between the fifth- and fourth-order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Dense-output coefficients.
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

double weighted_rms(const Eigen::VectorXd& err, const Eigen::VectorXd& y0,
                    const Eigen::VectorXd& y1, double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sk = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double q = err[i] / sk;
    acc += q * q;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

// Standard starting-step heuristic based on the size of the field and a
// crude second-derivative probe.
double initial_step_guess(const OdeField& f, double t0, const Eigen::VectorXd& y0,
                          const Eigen::VectorXd& f0, double dir, double span,
                          double atol, double rtol) {
  const auto n = y0.size();
  double dnf = 0.0, dny = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sk = atol + rtol * std::abs(y0[i]);
    dnf += (f0[i] / sk) * (f0[i] / sk);
    dny += (y0[i] / sk) * (y0[i] / sk);
  }
  dnf /= static_cast<double>(n);
  dny /= static_cast<double>(n);
  double h0 = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
  h0 = std::min(h0, span);

  Eigen::VectorXd y1 = y0 + dir * h0 * f0;
  Eigen::VectorXd f1(n);
  f(t0 + dir * h0, y1, f1);
  double der2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sk = atol + rtol * std::abs(y0[i]);
    const double q = (f1[i] - f0[i]) / sk;
    der2 += q * q;
  }
  der2 = std::sqrt(der2 / static_cast<double>(n)) / h0;

  const double der12 = std::max(der2, std::sqrt(dnf));
  double h1 = (der12 <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                               : std::pow(0.01 / der12, 0.2);
  return std::min({100.0 * h0, h1, span});
}

}  // namespace

void SolverConfig::validate() const {
  if (!(rtol > 0.0) || !(atol > 0.0)) {
    throw std::invalid_argument("solver tolerances must be positive");
  }
  if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  if (!(safety > 0.0 && safety < 1.0)) {
    throw std::invalid_argument("safety factor must be in (0, 1)");
  }
  if (!(min_scale > 0.0 && min_scale < 1.0 && max_scale > 1.0)) {
    throw std::invalid_argument("step scale limits must satisfy 0 < min < 1 < max");
  }
}

Eigen::VectorXd Trajectory::value_at(double t) const {
  if (segments.empty()) {
    throw std::logic_error("trajectory was integrated without dense output");
  }
  const double dir = segments.front().h > 0 ? 1.0 : -1.0;
  const double lo = times.front() * dir, hi = times.back() * dir;
  const double tt = t * dir;
  const double slack = 1e-12 * (1.0 + std::abs(times.back() - times.front()));
  if (tt < lo - slack || tt > hi + slack) {
    throw std::out_of_range("interpolation time outside the integrated span");
  }
  // binary search for the segment containing t
  std::size_t a = 0, b = segments.size() - 1;
  while (a < b) {
    const std::size_t mid = (a + b) / 2;
    const auto& s = segments[mid];
    if ((s.t_start + s.h) * dir >= tt) {
      b = mid;
    } else {
      a = mid + 1;
    }
  }
  const auto& s = segments[a];
  const double theta = std::clamp((t - s.t_start) / s.h, 0.0, 1.0);
  const double theta1 = 1.0 - theta;
  return s.coeff.col(0) +
         theta * (s.coeff.col(1) +
                  theta1 * (s.coeff.col(2) +
                            theta * (s.coeff.col(3) + theta1 * s.coeff.col(4))));
}

Trajectory dopri5_integrate(const OdeField& f, const Eigen::VectorXd& x0, double t0,
                            double t1, const SolverConfig& cfg, bool dense_output) {
  cfg.validate();
  const auto n = x0.size();
  if (n == 0) throw std::invalid_argument("empty initial state");

  Trajectory traj;
  traj.times.push_back(t0);
  traj.states.push_back(x0);
  if (t1 == t0) return traj;

  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const double expo1 = 0.2 - cfg.beta * 0.75;

  Eigen::VectorXd y = x0;
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
  Eigen::VectorXd ytmp(n), ynew(n), yerr(n);

  double t = t0;
  f(t, y, k1);
  if (!k1.allFinite()) {
    throw SolverError("right-hand side is not finite at the initial state", t, 0.0, 0);
  }

  double h = cfg.initial_step > 0.0
                 ? dir * std::min(cfg.initial_step, span)
                 : dir * initial_step_guess(f, t0, y, k1, dir, span, cfg.atol, cfg.rtol);
  double facold = 1e-4;
  bool rejected = false;
  long steps = 0;

  while (true) {
    if (steps >= cfg.max_steps) {
      throw SolverError("step budget exhausted after " + std::to_string(steps) +
                            " steps at t=" + format_g17(t),
                        t, h, steps);
    }
    if (std::abs(h) < 1e-14 * span) {
      throw SolverError("step size underflow at t=" + format_g17(t) +
                            " (h=" + format_g17(h) + ")",
                        t, h, steps);
    }
    bool last = false;
    if ((t + h - t1) * dir >= 0.0) {
      h = t1 - t;
      last = true;
    }
    ++steps;

    ytmp = y + h * (a21 * k1);
    f(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    f(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + h, ytmp, k6);
    ynew = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + h, ynew, k7);

    yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double err = std::numeric_limits<double>::infinity();
    if (ynew.allFinite() && yerr.allFinite()) {
      err = weighted_rms(yerr, y, ynew, cfg.atol, cfg.rtol);
    }

    const double fac11 = std::pow(std::max(err, 1e-30), expo1);
    if (err <= 1.0) {
      // accepted
      facold = std::max(err, 1e-4);
      if (dense_output) {
        DenseSegment seg;
        seg.t_start = t;
        seg.h = h;
        seg.coeff.resize(n, 5);
        seg.coeff.col(0) = y;
        seg.coeff.col(1) = ynew - y;
        seg.coeff.col(2) = h * k1 - seg.coeff.col(1);
        seg.coeff.col(3) = seg.coeff.col(1) - h * k7 - seg.coeff.col(2);
        seg.coeff.col(4) =
            h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        traj.segments.push_back(std::move(seg));
      }
      t = last ? t1 : t + h;
      y.swap(ynew);
      k1.swap(k7);  // first-same-as-last
      traj.times.push_back(t);
      traj.states.push_back(y);
      if (last) break;

      double fac = fac11 / std::pow(facold, cfg.beta);
      fac = std::max(1.0 / cfg.max_scale, std::min(1.0 / cfg.min_scale, fac / cfg.safety));
      double hnew = h / fac;
      if (rejected) hnew = dir * std::min(std::abs(hnew), std::abs(h));
      rejected = false;
      h = hnew;
    } else {
      // rejected: shrink and retry from the same point
      h /= std::min(1.0 / cfg.min_scale, fac11 / cfg.safety);
      rejected = true;
    }
  }
  return traj;
}

Trajectory rk4_integrate(const OdeField& f, const Eigen::VectorXd& x0,
                         const std::vector<double>& t_grid) {
  if (t_grid.size() < 2) throw std::invalid_argument("rk4 needs at least two grid points");
  const auto n = x0.size();
  Trajectory traj;
  traj.times = t_grid;
  traj.states.reserve(t_grid.size());
  traj.states.push_back(x0);

  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), ytmp(n);
  Eigen::VectorXd y = x0;
  for (std::size_t i = 0; i + 1 < t_grid.size(); ++i) {
    const double t = t_grid[i];
    const double h = t_grid[i + 1] - t;
    f(t, y, k1);
    ytmp = y + 0.5 * h * k1;
    f(t + 0.5 * h, ytmp, k2);
    ytmp = y + 0.5 * h * k2;
    f(t + 0.5 * h, ytmp, k3);
    ytmp = y + h * k3;
    f(t + h, ytmp, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) {
      throw SolverError("state became non-finite at t=" + format_g17(t + h), t + h, h,
                        static_cast<long>(i + 1));
    }
    traj.states.push_back(y);
  }
  return traj;
}

Trajectory rk4_integrate(const OdeField& f, const Eigen::VectorXd& x0, double t0,
                         double t1, long n_steps) {
  if (n_steps <= 0) throw std::invalid_argument("rk4 needs a positive step count");
  std::vector<double> grid(static_cast<std::size_t>(n_steps) + 1);
  for (long i = 0; i <= n_steps; ++i) {
    grid[static_cast<std::size_t>(i)] =
        t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n_steps);
  }
  grid.back() = t1;
  return rk4_integrate(f, x0, grid);
}

void write_trajectory_csv(
    const std::string& path, const Trajectory& traj,
    const std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>& control) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  const int n = traj.state_dim();
  os << 't';
  for (int i = 0; i < n; ++i) os << ",x" << i;
  int n_u = 0;
  if (control) {
    const Eigen::VectorXd u0 = control(traj.times.front(), traj.states.front());
    n_u = static_cast<int>(u0.size());
    if (n_u == 1) {
      os << ",u";
    } else {
      for (int i = 0; i < n_u; ++i) os << ",u" << i;
    }
  }
  os << '\n';
  for (std::size_t row = 0; row < traj.times.size(); ++row) {
    os << format_g17(traj.times[row]);
    for (int i = 0; i < n; ++i) os << ',' << format_g17(traj.states[row][i]);
    if (control) {
      const Eigen::VectorXd u = control(traj.times[row], traj.states[row]);
      for (int i = 0; i < n_u; ++i) os << ',' << format_g17(u[i]);
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace oes
