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

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oes/closed_loop.hpp"
#include "oes/controller.hpp"

namespace oes {

/// Task cost definition shared by training and evaluation.
struct CostSpec {
  enum class Variant { RegulationNll, SetpointQuadratic };
  Variant variant = Variant::RegulationNll;

  double gamma = 0.01;   ///< effort weight
  double q_star = 0.0;   ///< regulation target position
  double sigma2 = 1e-3;  ///< regulation target variance
  Eigen::Vector2d Q{10.0, 1.0};  ///< set-point diagonal weights
  double horizon = 3.0;  ///< T [s]
  double smoothing_eps = 1e-6;

  void validate() const;

  /// Per-rollout cost terms; `target` supplies the sampled set point for
  /// the quadratic variant and is ignored otherwise.
  RolloutCost rollout(const Eigen::Vector2d& target = Eigen::Vector2d::Zero()) const;
};

/// Uniform boxes for initial conditions and (for the set-point task)
/// targets, plus batch shape.
struct SamplerConfig {
  double q_min = -6.283185307179586, q_max = 6.283185307179586;
  double p_min = -6.283185307179586, p_max = 6.283185307179586;
  double qstar_min = -6.283185307179586, qstar_max = 6.283185307179586;
  double pstar_min = -1e-4, pstar_max = 1e-4;
  int batch = 256;           ///< N initial conditions
  int setpoint_samples = 4;  ///< M targets per initial condition
  std::uint64_t seed = 0;

  void validate() const;
};

struct Batch {
  std::vector<Eigen::Vector2d> initial_states;  ///< N draws
  std::vector<Eigen::Vector2d> targets;         ///< N*M draws, grouped per x0
};

/// Uniform draws from the configured boxes; deterministic per rng state
/// and independent of the platform's distribution implementation.
Batch sample_batch(const SamplerConfig& cfg, std::mt19937_64& rng, bool with_targets);

/// Fresh-rng convenience overload seeded from cfg.seed.
Batch sample_batch(const SamplerConfig& cfg, bool with_targets = false);

struct CostBreakdown {
  double terminal = 0.0;
  double integral = 0.0;  ///< exact effort integral
};

/// Reporting costs on a dense trajectory: terminal negative log-likelihood
/// of N((q_star, 0), sigma2 I) at x(T) plus the exact integral of |u|,
/// computed by per-segment Gauss-Legendre quadrature on the dense output.
CostBreakdown regulation_cost(
    const Trajectory& traj,
    const std::function<double(double, const Eigen::VectorXd&)>& control,
    double q_star, double sigma2);

/// Mean over sampled targets of (x(T) - x*)^T diag(Q) (x(T) - x*) plus the
/// integral of u^2 / 2 along the trajectory.
double setpoint_cost(const Trajectory& traj,
                     const std::function<double(double, const Eigen::VectorXd&)>& control,
                     const std::vector<Eigen::Vector2d>& targets,
                     const Eigen::Vector2d& Q);

/// Adam optimizer state over a flat parameter vector.
struct AdamState {
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(Eigen::Index n, double lr, double beta1 = 0.9,
                        double beta2 = 0.999, double eps = 1e-8);
};

/// One bias-corrected Adam update in place. A non-finite gradient skips the
/// update (returns false) so a single bad batch cannot poison the moments.
bool adam_step(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad);

struct TrainConfig {
  enum class Mode { Oes, PdPlus };
  Mode mode = Mode::Oes;
  PendulumParams plant;
  CostSpec cost;
  SamplerConfig sampler;
  SolverConfig solver;  ///< training-time tolerances
  OesArchitecture architecture;
  InitMode init = InitMode::ZeroLastLayer;
  double learning_rate = -1.0;  ///< negative: mode default (1e-3 OES, 1 PD)
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int iterations = 300;
  int checkpoint_interval = 0;  ///< every k iterations; 0 writes only the final one
  double stop_rel_change = 1e-4;  ///< plateau stop: relative loss change ...
  int stop_window = 20;           ///< ... over this many iterations
  int workers = 1;
  std::uint64_t seed = 0;
  double max_failure_fraction = 0.10;
  /// Training integrates wide, high-energy initial conditions at loose
  /// tolerances where the damped dynamics are not reliably reversible, so
  /// the costate solve reads states from a stored dense forward pass by
  /// default. Turn off to use the O(1)-memory backward reconstruction.
  bool checkpoint_states = true;

  void validate() const;
  double effective_learning_rate() const;
};

struct IterationRow {
  int iter = 0;
  double loss = 0.0;
  double terminal = 0.0;
  double integral = 0.0;
  double wallclock_s = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<IterationRow> log;
  bool stopped_early = false;
  int skipped_updates = 0;
  int failed_rollouts = 0;
};

struct TrainHooks {
  std::function<void(int iter, const Checkpoint&)> on_checkpoint;
  std::function<void(const IterationRow&)> on_iteration;
  std::function<void(int iter, const Eigen::VectorXd& batch_gradient)> on_gradient;
};

/// Gradient-descent training loop: per iteration, sample a fresh batch,
/// average the per-rollout costate gradients in index order (bitwise
/// deterministic for any worker count), apply one Adam step, log costs.
/// PD gains are projected back to [0, inf) after every step. Throws when
/// more than max_failure_fraction of a batch fails to integrate.
TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks = {});

/// One evaluation rollout request; `target` feeds the set-point variant.
struct RolloutRequest {
  Eigen::Vector2d x0{0.0, 0.0};
  Eigen::Vector2d target{0.0, 0.0};
};

struct EvalRow {
  Eigen::Vector2d x0;
  Eigen::Vector2d xT;
  double terminal = 0.0;
  double integral = 0.0;
  double target_q = 0.0;
};

struct EvalSummary {
  double terminal_mean = 0.0;
  double integral_mean = 0.0;
  std::vector<EvalRow> rows;
};

/// Integrates fresh rollouts at the given (typically tight) tolerance and
/// reports per-rollout and mean costs.
EvalSummary evaluate(const Checkpoint& ckpt, const CostSpec& cost,
                     const std::vector<RolloutRequest>& requests,
                     const SolverConfig& solver, int workers = 1);

struct ParetoEntry {
  std::string method;  ///< "oes" or "pdplus"
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double terminal = 0.0;
  double integral = 0.0;
  std::string status;  ///< "ok" or the failure reason
};

/// Trains both methods per (gamma, seed), evaluates each converged
/// controller on one shared fresh batch, and returns the tidy table
/// (|gammas| x |seeds| x 2 rows). Individual run failures are recorded in
/// the status column, not fatal.
std::vector<ParetoEntry> pareto_sweep(
    const TrainConfig& base, const std::vector<double>& gammas,
    const std::vector<std::uint64_t>& seeds, int eval_batch, std::uint64_t eval_seed,
    const SolverConfig& eval_solver,
    const std::function<void(const ParetoEntry&)>& on_entry = nullptr);

}  // namespace oes
