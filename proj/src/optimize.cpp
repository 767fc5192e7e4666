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

#include "oes/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "oes/util.hpp"

namespace oes {
namespace {

double uniform_in(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// 5-point Gauss-Legendre rule on [0, 1]
constexpr double kGlNode[5] = {0.04691007703066800, 0.23076534494715845, 0.5,
                               0.76923465505284155, 0.95308992296933200};
constexpr double kGlWeight[5] = {0.11846344252809454, 0.23931433524968324,
                                 0.28444444444444444, 0.23931433524968324,
                                 0.11846344252809454};

double integrate_dense(
    const Trajectory& traj,
    const std::function<double(double, const Eigen::VectorXd&)>& integrand) {
  if (!traj.has_dense()) {
    throw std::invalid_argument("cost quadrature needs a dense trajectory");
  }
  double total = 0.0;
  for (const auto& seg : traj.segments) {
    double acc = 0.0;
    for (int i = 0; i < 5; ++i) {
      const double theta = kGlNode[i];
      const double theta1 = 1.0 - theta;
      const Eigen::VectorXd x =
          seg.coeff.col(0) +
          theta * (seg.coeff.col(1) +
                   theta1 * (seg.coeff.col(2) +
                             theta * (seg.coeff.col(3) + theta1 * seg.coeff.col(4))));
      acc += kGlWeight[i] * integrand(seg.t_start + theta * seg.h, x);
    }
    total += seg.h * acc;
  }
  return total;
}

}  // namespace

void CostSpec::validate() const {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("target variance must be positive");
  if (gamma < 0.0) throw std::invalid_argument("effort weight must be nonnegative");
  if (Q.minCoeff() < 0.0) throw std::invalid_argument("Q must be positive semidefinite");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (!(smoothing_eps > 0.0)) throw std::invalid_argument("smoothing eps must be positive");
}

RolloutCost CostSpec::rollout(const Eigen::Vector2d& target) const {
  RolloutCost rc;
  if (variant == Variant::RegulationNll) {
    rc.terminal = RolloutCost::Terminal::GaussianNll;
    rc.q_star = q_star;
    rc.sigma2 = sigma2;
    rc.effort = RolloutCost::Effort::SmoothedAbs;
  } else {
    rc.terminal = RolloutCost::Terminal::Quadratic;
    rc.target = target;
    rc.weights = Q;
    rc.effort = RolloutCost::Effort::HalfSquare;
  }
  rc.effort_weight = gamma;
  rc.smoothing_eps = smoothing_eps;
  return rc;
}

void SamplerConfig::validate() const {
  if (!(q_min < q_max) || !(p_min < p_max) || !(qstar_min < qstar_max) ||
      !(pstar_min < pstar_max)) {
    throw std::invalid_argument("sampler boxes must be nondegenerate");
  }
  if (batch < 1 || setpoint_samples < 1) {
    throw std::invalid_argument("batch and setpoint sample counts must be at least 1");
  }
}

Batch sample_batch(const SamplerConfig& cfg, std::mt19937_64& rng, bool with_targets) {
  cfg.validate();
  Batch batch;
  batch.initial_states.reserve(static_cast<std::size_t>(cfg.batch));
  for (int i = 0; i < cfg.batch; ++i) {
    const double q = uniform_in(rng, cfg.q_min, cfg.q_max);
    const double p = uniform_in(rng, cfg.p_min, cfg.p_max);
    batch.initial_states.emplace_back(q, p);
    if (with_targets) {
      for (int j = 0; j < cfg.setpoint_samples; ++j) {
        const double qs = uniform_in(rng, cfg.qstar_min, cfg.qstar_max);
        const double ps = uniform_in(rng, cfg.pstar_min, cfg.pstar_max);
        batch.targets.emplace_back(qs, ps);
      }
    }
  }
  return batch;
}

Batch sample_batch(const SamplerConfig& cfg, bool with_targets) {
  std::mt19937_64 rng(cfg.seed);
  return sample_batch(cfg, rng, with_targets);
}

CostBreakdown regulation_cost(
    const Trajectory& traj,
    const std::function<double(double, const Eigen::VectorXd&)>& control,
    double q_star, double sigma2) {
  CostBreakdown out;
  const Eigen::VectorXd& xT = traj.final_state();
  const double eq = xT[0] - q_star;
  const double ep = xT[1];
  out.terminal = (eq * eq + ep * ep) / (2.0 * sigma2) +
                 std::log(2.0 * std::numbers::pi * sigma2);
  out.integral = integrate_dense(traj, [&](double t, const Eigen::VectorXd& x) {
    return std::abs(control(t, x));
  });
  return out;
}

double setpoint_cost(const Trajectory& traj,
                     const std::function<double(double, const Eigen::VectorXd&)>& control,
                     const std::vector<Eigen::Vector2d>& targets,
                     const Eigen::Vector2d& Q) {
  if (targets.empty()) throw std::invalid_argument("need at least one target sample");
  if (Q.minCoeff() < 0.0) throw std::invalid_argument("Q must be positive semidefinite");
  const Eigen::Vector2d xT = traj.final_state().head<2>();
  double terminal = 0.0;
  for (const auto& target : targets) {
    const Eigen::Vector2d e = xT - target;
    terminal += Q.dot(e.cwiseProduct(e));
  }
  terminal /= static_cast<double>(targets.size());
  const double effort = integrate_dense(traj, [&](double t, const Eigen::VectorXd& x) {
    const double u = control(t, x);
    return 0.5 * u * u;
  });
  return terminal + effort;
}

AdamState AdamState::init(Eigen::Index n, double lr, double beta1, double beta2,
                          double eps) {
  AdamState s;
  s.m = Eigen::VectorXd::Zero(n);
  s.v = Eigen::VectorXd::Zero(n);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

bool adam_step(AdamState& state, Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
  if (theta.size() != state.m.size() || grad.size() != state.m.size()) {
    throw std::invalid_argument("Adam state and parameter dimensions disagree");
  }
  ++state.step;
  if (!grad.allFinite()) return false;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  theta.array() -= state.lr * (state.m.array() / c1) /
                   ((state.v.array() / c2).sqrt() + state.eps);
  return true;
}

void TrainConfig::validate() const {
  plant.validate();
  cost.validate();
  sampler.validate();
  solver.validate();
  if (iterations < 0) throw std::invalid_argument("iterations must be nonnegative");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (stop_window < 1) throw std::invalid_argument("stop window must be at least 1");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw std::invalid_argument("failure fraction must be in [0, 1]");
  }
  if (mode == Mode::PdPlus && cost.variant == CostSpec::Variant::SetpointQuadratic) {
    throw std::invalid_argument("the PD baseline only supports the regulation task");
  }
}

double TrainConfig::effective_learning_rate() const {
  if (learning_rate > 0.0) return learning_rate;
  return mode == Mode::Oes ? 1e-3 : 1.0;
}

namespace {

struct RolloutOutcome {
  bool ok = false;
  double total = 0.0;
  double terminal = 0.0;
  double effort = 0.0;  // exact effort metric
  Eigen::VectorXd gradient;
  std::string error;
};

std::shared_ptr<PendulumLaw> make_law(const TrainConfig& cfg, const Checkpoint& ckpt,
                                      double target_q) {
  if (cfg.mode == TrainConfig::Mode::Oes) {
    return std::make_shared<OesLaw>(ckpt.oes, cfg.plant, target_q);
  }
  return std::make_shared<PdPlusLaw>(ckpt.pd);
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(cfg.seed);

  TrainResult result;
  result.checkpoint.plant = cfg.plant;
  const bool setpoint = cfg.cost.variant == CostSpec::Variant::SetpointQuadratic;
  if (cfg.mode == TrainConfig::Mode::Oes) {
    result.checkpoint.type = Checkpoint::Type::Oes;
    result.checkpoint.oes = make_oes_controller(cfg.architecture, cfg.cost.horizon,
                                                setpoint, rng, cfg.init);
  } else {
    result.checkpoint.type = Checkpoint::Type::PdPlus;
    result.checkpoint.pd.k_p = 0.0;
    result.checkpoint.pd.k_d = 0.0;
    result.checkpoint.pd.q_star = cfg.cost.q_star;
    result.checkpoint.pd.plant = cfg.plant;
  }

  Eigen::VectorXd theta = cfg.mode == TrainConfig::Mode::Oes
                              ? result.checkpoint.oes.packed_params()
                              : Eigen::VectorXd::Zero(2);
  AdamState adam = AdamState::init(theta.size(), cfg.effective_learning_rate(),
                                   cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

  auto sync_checkpoint = [&] {
    if (cfg.mode == TrainConfig::Mode::Oes) {
      result.checkpoint.oes.set_packed_params(theta);
    } else {
      result.checkpoint.pd.k_p = theta[0];
      result.checkpoint.pd.k_d = theta[1];
    }
  };

  if (hooks.on_checkpoint) hooks.on_checkpoint(0, result.checkpoint);

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const Batch batch = sample_batch(cfg.sampler, rng, setpoint);
    const int rollouts = setpoint
                             ? cfg.sampler.batch * cfg.sampler.setpoint_samples
                             : cfg.sampler.batch;

    std::vector<RolloutOutcome> outcomes(static_cast<std::size_t>(rollouts));
    parallel_for(rollouts, cfg.workers, [&](int r) {
      auto& slot = outcomes[static_cast<std::size_t>(r)];
      const Eigen::Vector2d x0 =
          batch.initial_states[static_cast<std::size_t>(
              setpoint ? r / cfg.sampler.setpoint_samples : r)];
      const Eigen::Vector2d target =
          setpoint ? batch.targets[static_cast<std::size_t>(r)] : Eigen::Vector2d::Zero();
      try {
        auto law = make_law(cfg, result.checkpoint, target[0]);
        const AdjointProblem problem = make_pendulum_problem(
            cfg.plant, law, cfg.cost.rollout(target), cfg.cost.horizon, cfg.solver);
        GradOptions options;
        options.checkpoint_states = cfg.checkpoint_states;
        const GradResult g = grad(problem, x0, options);
        slot.ok = true;
        slot.total = g.total;
        slot.terminal = g.terminal;
        slot.effort = g.metrics[0];
        slot.gradient = g.gradient;
      } catch (const std::exception& e) {
        slot.ok = false;
        slot.error = e.what();
      }
    });

    // deterministic fixed-order reduction
    Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(theta.size());
    double mean_loss = 0.0, mean_terminal = 0.0, mean_effort = 0.0;
    int ok_count = 0;
    std::string first_error;
    for (const auto& slot : outcomes) {
      if (!slot.ok) {
        if (first_error.empty()) first_error = slot.error;
        continue;
      }
      ++ok_count;
      mean_grad += slot.gradient;
      mean_loss += slot.total;
      mean_terminal += slot.terminal;
      mean_effort += slot.effort;
    }
    const int failures = rollouts - ok_count;
    result.failed_rollouts += failures;
    if (ok_count == 0 || failures > cfg.max_failure_fraction * rollouts) {
      throw std::runtime_error(
          "iteration " + std::to_string(iter) + ": " + std::to_string(failures) + "/" +
          std::to_string(rollouts) + " rollouts failed (first: " + first_error + ")");
    }
    mean_grad /= static_cast<double>(ok_count);
    mean_loss /= static_cast<double>(ok_count);
    mean_terminal /= static_cast<double>(ok_count);
    mean_effort /= static_cast<double>(ok_count);

    if (hooks.on_gradient) hooks.on_gradient(iter, mean_grad);

    if (!adam_step(adam, theta, mean_grad)) ++result.skipped_updates;
    if (cfg.mode == TrainConfig::Mode::PdPlus) {
      theta = theta.cwiseMax(0.0);  // keep the baseline in the passive family
    }
    sync_checkpoint();

    IterationRow row;
    row.iter = iter;
    row.loss = mean_loss;
    row.terminal = mean_terminal;
    row.integral = mean_effort;
    row.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(row);
    if (hooks.on_iteration) hooks.on_iteration(row);
    if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 &&
        iter % cfg.checkpoint_interval == 0) {
      hooks.on_checkpoint(iter, result.checkpoint);
    }

    if (static_cast<int>(result.log.size()) > cfg.stop_window) {
      const double prev =
          result.log[result.log.size() - 1 - static_cast<std::size_t>(cfg.stop_window)]
              .loss;
      if (std::abs(row.loss - prev) < cfg.stop_rel_change * std::max(1.0, std::abs(prev))) {
        result.stopped_early = true;
        break;
      }
    }
  }

  sync_checkpoint();
  if (hooks.on_checkpoint) hooks.on_checkpoint(-1, result.checkpoint);
  return result;
}

EvalSummary evaluate(const Checkpoint& ckpt, const CostSpec& cost,
                     const std::vector<RolloutRequest>& requests,
                     const SolverConfig& solver, int workers) {
  cost.validate();
  EvalSummary summary;
  summary.rows.resize(requests.size());
  parallel_for(static_cast<int>(requests.size()), workers, [&](int i) {
    const auto& req = requests[static_cast<std::size_t>(i)];
    std::shared_ptr<PendulumLaw> law;
    if (ckpt.type == Checkpoint::Type::Oes) {
      law = std::make_shared<OesLaw>(ckpt.oes, ckpt.plant, req.target[0]);
    } else {
      law = std::make_shared<PdPlusLaw>(ckpt.pd);
    }
    const AdjointProblem problem = make_pendulum_problem(
        ckpt.plant, law, cost.rollout(req.target), cost.horizon, solver);
    const LossResult res = loss(problem, req.x0);
    auto& row = summary.rows[static_cast<std::size_t>(i)];
    row.x0 = req.x0;
    row.xT = res.trajectory.final_state().head<2>();
    row.terminal = res.terminal;
    row.integral = res.metrics[0];
    row.target_q = req.target[0];
  });
  for (const auto& row : summary.rows) {
    summary.terminal_mean += row.terminal;
    summary.integral_mean += row.integral;
  }
  if (!summary.rows.empty()) {
    summary.terminal_mean /= static_cast<double>(summary.rows.size());
    summary.integral_mean /= static_cast<double>(summary.rows.size());
  }
  return summary;
}

std::vector<ParetoEntry> pareto_sweep(
    const TrainConfig& base, const std::vector<double>& gammas,
    const std::vector<std::uint64_t>& seeds, int eval_batch, std::uint64_t eval_seed,
    const SolverConfig& eval_solver,
    const std::function<void(const ParetoEntry&)>& on_entry) {
  std::vector<ParetoEntry> table;
  SamplerConfig eval_sampler = base.sampler;
  eval_sampler.batch = eval_batch;
  eval_sampler.seed = eval_seed;
  const Batch eval_points = sample_batch(eval_sampler, false);
  std::vector<RolloutRequest> requests(eval_points.initial_states.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    requests[i].x0 = eval_points.initial_states[i];
  }

  for (double gamma : gammas) {
    for (std::uint64_t seed : seeds) {
      for (const auto mode : {TrainConfig::Mode::Oes, TrainConfig::Mode::PdPlus}) {
        ParetoEntry entry;
        entry.method = mode == TrainConfig::Mode::Oes ? "oes" : "pdplus";
        entry.gamma = gamma;
        entry.seed = seed;
        try {
          TrainConfig cfg = base;
          cfg.mode = mode;
          cfg.cost.gamma = gamma;
          cfg.seed = seed;
          const TrainResult trained = train(cfg);
          const EvalSummary summary =
              evaluate(trained.checkpoint, cfg.cost, requests, eval_solver, cfg.workers);
          entry.terminal = summary.terminal_mean;
          entry.integral = summary.integral_mean;
          entry.status = "ok";
        } catch (const std::exception& e) {
          entry.status = std::string("failed: ") + e.what();
        }
        table.push_back(entry);
        if (on_entry) on_entry(entry);
      }
    }
  }
  return table;
}

}  // namespace oes
