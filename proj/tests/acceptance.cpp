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

// End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
// the exit code is the number of failures. Criteria 5-8 train controllers
// at desk scale, so the full suite takes roughly an hour on two cores.
//
//   acceptance [--only 1,2,...] [--skip 7] [--workers N] [--out DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "oes/optimize.hpp"
#include "oes/util.hpp"

using namespace oes;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = std::numbers::pi;

// ---------------------------------------------------------------------------
// Desk-scale training settings shared by the training criteria. The task
// definition (batch 256, 300 iterations, gamma 0.01, sigma^2 1e-3, T = 3,
// initial conditions uniform in [-2pi, 2pi]^2) is fixed; learning rate and
// Adam's second-moment decay are calibrated for the 300-iteration budget
// (the reference uses 1e-3 with a much larger batch and unreported
// iteration count).
constexpr double kOesLearningRate = 1e-2;
constexpr double kOesAdamBeta2 = 0.99;
constexpr double kPdLearningRate = 1.0;
constexpr int kExp1Iterations = 300;
constexpr int kExp1Batch = 256;
constexpr double kExp1Gamma = 0.01;
constexpr std::uint64_t kTrainSeed = 2024;
constexpr std::uint64_t kEvalSeed = 90210;
constexpr double kTrainTol = 1e-5;
constexpr double kEvalTol = 1e-8;

int g_workers = 2;
fs::path g_out = "acceptance_out";

OesArchitecture paper_arch() {
  return OesArchitecture{};  // 64x64 softplus/tanh potential, 64 softplus gain
}

OesArchitecture probe_arch() {
  OesArchitecture arch;
  arch.potential_hidden = {8, 8};
  arch.potential_activations = {Activation::Softplus, Activation::Tanh};
  arch.gain_hidden = {8};
  arch.gain_activations = {Activation::Softplus};
  return arch;
}

TrainConfig exp1_config(TrainConfig::Mode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.architecture = paper_arch();
  cfg.cost.variant = CostSpec::Variant::RegulationNll;
  cfg.cost.gamma = kExp1Gamma;
  cfg.cost.sigma2 = 1e-3;
  cfg.cost.q_star = 0.0;
  cfg.cost.horizon = 3.0;
  cfg.sampler.batch = kExp1Batch;
  cfg.solver.rtol = cfg.solver.atol = kTrainTol;
  cfg.iterations = kExp1Iterations;
  cfg.learning_rate = mode == TrainConfig::Mode::Oes ? kOesLearningRate : kPdLearningRate;
  cfg.adam_beta2 = mode == TrainConfig::Mode::Oes ? kOesAdamBeta2 : 0.999;
  cfg.stop_rel_change = 0.0;  // run the full budget
  cfg.workers = g_workers;
  cfg.seed = kTrainSeed;
  return cfg;
}

SolverConfig tight_solver() {
  SolverConfig cfg;
  cfg.rtol = cfg.atol = kEvalTol;
  return cfg;
}

std::vector<RolloutRequest> fresh_requests(int n, std::uint64_t seed) {
  SamplerConfig sampler;
  sampler.batch = n;
  sampler.seed = seed;
  const Batch batch = sample_batch(sampler, false);
  std::vector<RolloutRequest> reqs(batch.initial_states.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) reqs[i].x0 = batch.initial_states[i];
  return reqs;
}

// Exp-1 training artifacts shared by criteria 3, 5 and 6.
struct Exp1Artifacts {
  TrainResult oes;
  TrainResult pd;
  EvalSummary oes_eval;
  EvalSummary pd_eval;
};

const Exp1Artifacts& exp1_artifacts() {
  static std::optional<Exp1Artifacts> cache;
  if (!cache) {
    Exp1Artifacts a;
    std::printf("  [setup] training the energy-shaping controller (%d iterations, "
                "batch %d)...\n",
                kExp1Iterations, kExp1Batch);
    std::fflush(stdout);
    a.oes = train(exp1_config(TrainConfig::Mode::Oes));
    std::printf("  [setup] training the PD baseline...\n");
    std::fflush(stdout);
    a.pd = train(exp1_config(TrainConfig::Mode::PdPlus));
    const auto requests = fresh_requests(kExp1Batch, kEvalSeed);
    const CostSpec cost = exp1_config(TrainConfig::Mode::Oes).cost;
    a.oes_eval = evaluate(a.oes.checkpoint, cost, requests, tight_solver(), g_workers);
    a.pd_eval = evaluate(a.pd.checkpoint, cost, requests, tight_solver(), g_workers);
    fs::create_directories(g_out);
    save_checkpoint((g_out / "exp1_oes.json").string(), a.oes.checkpoint);
    save_checkpoint((g_out / "exp1_pd.json").string(), a.pd.checkpoint);
    cache = std::move(a);
  }
  return *cache;
}

double rel_l2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

// --------------------------------------------------------------------------

bool criterion_1(std::string& detail) {
  // Costate gradient vs central finite differences: 20 random draws of
  // (parameters, initial condition) on the regulation problem at 1e-8.
  const PendulumParams plant;
  RolloutCost cost;
  cost.effort_weight = kExp1Gamma;
  SolverConfig solver = tight_solver();

  const int draws = 20;
  std::vector<double> errors(draws, 1.0);
  std::vector<double> recon(draws, 1.0);
  std::mt19937_64 seeder(314159);
  std::vector<std::uint64_t> seeds(draws);
  for (auto& s : seeds) s = seeder();

  parallel_for(draws, g_workers, [&](int i) {
    std::mt19937_64 rng(seeds[static_cast<std::size_t>(i)]);
    OesController c = make_oes_controller(probe_arch(), 3.0, false, rng);
    std::uniform_real_distribution<double> perturb(-0.4, 0.4);
    for (Eigen::Index k = 0; k < c.theta_potential.size(); ++k) {
      c.theta_potential[k] += perturb(rng);
    }
    for (Eigen::Index k = 0; k < c.theta_gain.size(); ++k) c.theta_gain[k] += perturb(rng);
    std::uniform_real_distribution<double> box(-2.0 * kPi, 2.0 * kPi);
    const Eigen::Vector2d x0(box(rng), box(rng));

    const ProblemFactory factory = [&](const Eigen::VectorXd& theta) {
      OesController probe = c;
      probe.set_packed_params(theta);
      return make_pendulum_problem(plant, std::make_shared<OesLaw>(probe, plant), cost,
                                   3.0, solver);
    };
    const Eigen::VectorXd theta0 = c.packed_params();
    const GradResult g = grad(factory(theta0), x0);
    const Eigen::VectorXd fd = fd_grad(factory, theta0, x0, 1e-4);
    errors[static_cast<std::size_t>(i)] = rel_l2(g.gradient, fd);
    recon[static_cast<std::size_t>(i)] = g.reconstruction_error;
  });

  const double worst = *std::max_element(errors.begin(), errors.end());
  const double worst_recon = *std::max_element(recon.begin(), recon.end());
  detail = "max relative L2 error " + format_g17(worst) + " over " +
           std::to_string(draws) + " draws (bound 1e-4); max state reconstruction gap " +
           format_g17(worst_recon);
  return worst < 1e-4 && worst_recon < kReconstructionGuard;
}

bool criterion_2(std::string& detail) {
  // Matching equations hold exactly for configuration-only shaping.
  const PendulumParams plant;
  const MechanicalPH mech = plant.to_mechanical();
  const PHSystem sys = mech.to_ph_system();
  const Eigen::MatrixXd annihilator = mech.annihilator();

  std::mt19937_64 rng(271828);
  OesController c = make_oes_controller(paper_arch(), 3.0, false, rng);
  std::uniform_real_distribution<double> perturb(-0.5, 0.5);
  for (Eigen::Index k = 0; k < c.theta_potential.size(); ++k) {
    c.theta_potential[k] += perturb(rng);
  }
  const auto grad_shaped = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = sys.energy_grad(x);
    g[0] += mlp_grad_input(c.potential_spec, c.theta_potential, x.head(1))(0, 0);
    return g;
  };

  std::uniform_real_distribution<double> box(-2.0 * kPi, 2.0 * kPi);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d x(box(rng), box(rng));
    worst = std::max(worst,
                     matching_residual(sys, grad_shaped, annihilator, x).cwiseAbs()
                         .maxCoeff());
  }
  detail = "max residual " + format_g17(worst) + " over 1000 states (bound 1e-12)";
  return worst < 1e-12;
}

bool criterion_3(std::string& detail) {
  // Shaped energy is non-increasing along trained closed-loop trajectories.
  const auto& artifacts = exp1_artifacts();
  const OesController& c = artifacts.oes.checkpoint.oes;
  const PendulumParams plant = artifacts.oes.checkpoint.plant;
  const MechanicalPH mech = plant.to_mechanical();

  const auto requests = fresh_requests(100, kEvalSeed + 1);
  std::vector<double> worst_up(requests.size(), 0.0);
  parallel_for(static_cast<int>(requests.size()), g_workers, [&](int i) {
    auto law = std::make_shared<OesLaw>(c, plant);
    RolloutCost cost;
    cost.effort_weight = kExp1Gamma;
    const AdjointProblem problem =
        make_pendulum_problem(plant, law, cost, 3.0, tight_solver());
    const LossResult res = loss(problem, requests[static_cast<std::size_t>(i)].x0, true);
    double prev = shaped_energy(c, mech, requests[static_cast<std::size_t>(i)].x0.head(1),
                                requests[static_cast<std::size_t>(i)].x0.tail(1));
    double worst = 0.0;
    const int samples = 600;
    for (int k = 1; k <= samples; ++k) {
      const double t = 3.0 * k / samples;
      const Eigen::VectorXd x = res.trajectory.value_at(t);
      const double h = shaped_energy(c, mech, x.head(1), x.tail(1));
      const double allowed = 1e-6 * std::max(1.0, std::abs(prev));
      worst = std::max(worst, (h - prev) - allowed);
      prev = h;
    }
    worst_up[static_cast<std::size_t>(i)] = worst;
  });
  const double worst = *std::max_element(worst_up.begin(), worst_up.end());
  detail = "max tolerance-adjusted energy increase " + format_g17(worst) +
           " over 100 trajectories x 600 samples";
  return worst <= 0.0;
}

bool criterion_4(std::string& detail) {
  // Certified output bound on the shaped potential.
  const MlpSpec spec = [] {
    OesArchitecture arch = paper_arch();
    MlpSpec s;
    s.input_dim = 1;
    s.output_dim = 1;
    s.hidden_widths = arch.potential_hidden;
    s.hidden_activations = arch.potential_activations;
    s.output_activation = Activation::Identity;
    return s;
  }();

  std::mt19937_64 seeder(161803);
  std::vector<std::uint64_t> seeds(100);
  for (auto& s : seeds) s = seeder();
  std::vector<double> slack(seeds.size(), -1.0);

  parallel_for(static_cast<int>(seeds.size()), g_workers, [&](int i) {
    std::mt19937_64 rng(seeds[static_cast<std::size_t>(i)]);
    ParamVector theta = xavier_init(spec, rng);
    std::uniform_real_distribution<double> perturb(-0.5, 0.5);
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta[k] += perturb(rng);
    const double bound = output_bound(spec, theta);
    std::uniform_real_distribution<double> wide(-50.0, 50.0);
    double sup = 0.0;
    MlpTape tape;
    Eigen::VectorXd z(1);
    for (int k = 0; k < 100000; ++k) {
      z[0] = wide(rng);
      mlp_forward_tape(spec, theta, z, tape);
      sup = std::max(sup, std::abs(tape.out[0]));
    }
    slack[static_cast<std::size_t>(i)] = bound - sup;
  });
  const double min_slack = *std::min_element(slack.begin(), slack.end());
  detail = "min (bound - observed sup) = " + format_g17(min_slack) +
           " over 100 parameter draws x 1e5 inputs";
  return min_slack >= 0.0;
}

bool criterion_5(std::string& detail) {
  const auto& artifacts = exp1_artifacts();
  const double oes_terminal = artifacts.oes_eval.terminal_mean;
  const double oes_integral = artifacts.oes_eval.integral_mean;
  const double pd_terminal = artifacts.pd_eval.terminal_mean;
  const double pd_integral = artifacts.pd_eval.integral_mean;

  const bool terminal_ok = oes_terminal <= -4.5;
  const bool integral_ok = oes_integral < pd_integral;
  const bool parity_ok = std::abs(pd_terminal - oes_terminal) <= 0.5;

  // where the trained shaped energy places its minimum (grid at p = 0)
  const OesController& c = artifacts.oes.checkpoint.oes;
  const MechanicalPH mech = artifacts.oes.checkpoint.plant.to_mechanical();
  double argmin_q = 0.0, best = 1e300;
  for (int i = 0; i <= 4000; ++i) {
    const double q = -2.0 * kPi + 4.0 * kPi * i / 4000.0;
    const double h = shaped_energy(c, mech, Eigen::VectorXd::Constant(1, q),
                                   Eigen::VectorXd::Zero(1));
    if (h < best) {
      best = h;
      argmin_q = q;
    }
  }

  detail = "fresh-batch means: OES (terminal " + format_g17(oes_terminal) +
           ", integral " + format_g17(oes_integral) + "), PD (terminal " +
           format_g17(pd_terminal) + ", integral " + format_g17(pd_integral) +
           "); reference values (-5.00, 13.28) vs (-4.89, 15.73), floor -5.0702; " +
           "shaped-energy argmin at q=" + format_g17(argmin_q);
  return terminal_ok && integral_ok && parity_ok;
}

bool criterion_6(std::string& detail) {
  const auto& artifacts = exp1_artifacts();
  const double k_p = artifacts.pd.checkpoint.pd.k_p;
  const double k_d = artifacts.pd.checkpoint.pd.k_d;
  const bool positive = k_p > 0.0 && k_d > 0.0;
  const bool parity =
      std::abs(artifacts.pd_eval.terminal_mean - artifacts.oes_eval.terminal_mean) <= 0.5;
  const bool in_band =
      k_p > 6.55 / 2 && k_p < 6.55 * 2 && k_d > 4.89 / 2 && k_d < 4.89 * 2;
  detail = "converged gains k_p=" + format_g17(k_p) + " k_d=" + format_g17(k_d) +
           " (reference 6.55, 4.89; within factor 2: " + (in_band ? "yes" : "no") +
           "); desk-scale bar is positivity + terminal parity";
  return positive && parity;
}

bool criterion_7(std::string& detail) {
  // Cost-tradeoff sweep: the OES mean point must not be dominated by the
  // PD mean point at any effort weight.
  TrainConfig base = exp1_config(TrainConfig::Mode::Oes);
  base.sampler.batch = 64;
  base.iterations = 120;

  const std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0};
  const std::vector<std::uint64_t> seeds{11, 22, 33, 44, 55};
  const auto table = pareto_sweep(base, gammas, seeds, 128, kEvalSeed, tight_solver(),
                                  [](const ParetoEntry& e) {
                                    std::printf("  [sweep] %s gamma=%.2f seed=%llu -> "
                                                "(%.3f, %.3f) %s\n",
                                                e.method.c_str(), e.gamma,
                                                static_cast<unsigned long long>(e.seed),
                                                e.terminal, e.integral, e.status.c_str());
                                    std::fflush(stdout);
                                  });

  fs::create_directories(g_out);
  std::FILE* csv = std::fopen((g_out / "pareto.csv").string().c_str(), "w");
  if (csv) {
    std::fprintf(csv, "method,gamma,seed,terminal,integral,status\n");
    for (const auto& e : table) {
      std::fprintf(csv, "%s,%s,%llu,%s,%s,%s\n", e.method.c_str(),
                   format_g17(e.gamma).c_str(), static_cast<unsigned long long>(e.seed),
                   format_g17(e.terminal).c_str(), format_g17(e.integral).c_str(),
                   e.status.c_str());
    }
    std::fclose(csv);
  }

  bool all_ok = true;
  std::string verdicts;
  for (double gamma : gammas) {
    double ot = 0, oi = 0, pt = 0, pi = 0;
    int on = 0, pn = 0;
    for (const auto& e : table) {
      if (e.gamma != gamma || e.status != "ok") continue;
      if (e.method == "oes") {
        ot += e.terminal;
        oi += e.integral;
        ++on;
      } else {
        pt += e.terminal;
        pi += e.integral;
        ++pn;
      }
    }
    if (on == 0 || pn == 0) {
      all_ok = false;
      verdicts += " gamma=" + format_g17(gamma) + ": missing runs;";
      continue;
    }
    ot /= on;
    oi /= on;
    pt /= pn;
    pi /= pn;
    const bool dominated = pt <= ot && pi <= oi && (pt < ot || pi < oi);
    all_ok = all_ok && !dominated;
    verdicts += " gamma=" + format_g17(gamma) + ": OES(" + format_g17(ot) + "," +
                format_g17(oi) + ") PD(" + format_g17(pt) + "," + format_g17(pi) +
                ")" + (dominated ? " DOMINATED;" : ";");
  }
  detail = "mean points per gamma:" + verdicts;
  return all_ok;
}

bool criterion_8(std::string& detail) {
  // Set-point generalization at desk scale: T = 1, Q = diag(10, 1).
  TrainConfig cfg;
  cfg.mode = TrainConfig::Mode::Oes;
  cfg.cost.variant = CostSpec::Variant::SetpointQuadratic;
  cfg.cost.horizon = 1.0;
  cfg.cost.Q = Eigen::Vector2d(10.0, 1.0);
  cfg.cost.gamma = 0.25;  // desk-scale effort weight, see decisions ledger
  cfg.architecture.potential_hidden = {64, 64, 64};
  cfg.architecture.potential_activations = {Activation::Softplus, Activation::Softplus,
                                            Activation::Tanh};
  cfg.architecture.gain_hidden = {64, 64};
  cfg.architecture.gain_activations = {Activation::Softplus, Activation::Softplus};
  cfg.sampler.batch = 64;
  cfg.sampler.setpoint_samples = 4;
  cfg.solver.rtol = cfg.solver.atol = kTrainTol;
  cfg.iterations = 200;
  cfg.learning_rate = kOesLearningRate;
  cfg.adam_beta2 = kOesAdamBeta2;
  cfg.stop_rel_change = 0.0;
  cfg.workers = g_workers;
  cfg.seed = kTrainSeed + 1;

  std::printf("  [setup] training the set-point-conditioned controller...\n");
  std::fflush(stdout);
  const TrainResult trained = train(cfg);
  fs::create_directories(g_out);
  save_checkpoint((g_out / "exp2_oes.json").string(), trained.checkpoint);

  // 50 fresh initial conditions per set point, integrated tightly
  bool tracking_ok = true;
  std::string per_target;
  for (double q_star : {-1.0, 0.0, 1.0}) {
    auto requests = fresh_requests(50, kEvalSeed + 7);
    for (auto& r : requests) r.target = Eigen::Vector2d(q_star, 0.0);
    const EvalSummary sum =
        evaluate(trained.checkpoint, cfg.cost, requests, tight_solver(), g_workers);
    double mean_err = 0.0;
    for (const auto& row : sum.rows) mean_err += std::abs(row.xT[0] - q_star);
    mean_err /= static_cast<double>(sum.rows.size());
    tracking_ok = tracking_ok && mean_err < 0.5;
    per_target += " q*=" + format_g17(q_star) + ": mean|q(T)-q*|=" + format_g17(mean_err) +
                  ";";
  }

  // argmin of the learned potential per set-point slice
  const OesController& c = trained.checkpoint.oes;
  const PendulumParams plant = trained.checkpoint.plant;
  bool argmin_ok = true;
  for (double q_star : {-1.0, 0.0, 1.0}) {
    double best_q = 0.0, best_v = 1e300;
    for (int i = 0; i <= 2000; ++i) {
      const double q = -2.0 * kPi + 4.0 * kPi * i / 2000.0;
      Eigen::VectorXd in(2);
      in << q, q_star;
      const double v =
          plant.potential(q) + mlp_forward(c.potential_spec, c.theta_potential, in)[0];
      if (v < best_v) {
        best_v = v;
        best_q = q;
      }
    }
    argmin_ok = argmin_ok && std::abs(best_q - q_star) < 0.2;
    per_target += " argmin(q*=" + format_g17(q_star) + ")=" + format_g17(best_q) + ";";
  }

  detail = per_target + " (bounds: tracking 0.5 rad, argmin offset 0.2 rad)";
  return tracking_ok && argmin_ok;
}

bool criterion_9(std::string& detail) {
  PendulumParams plant;
  // (a) adaptive vs fixed-step agreement on the shaped closed loop
  std::mt19937_64 rng(424242);
  OesController c = make_oes_controller(paper_arch(), 3.0, false, rng);
  std::uniform_real_distribution<double> perturb(-0.3, 0.3);
  for (Eigen::Index k = 0; k < c.theta_potential.size(); ++k) c.theta_potential[k] += perturb(rng);
  for (Eigen::Index k = 0; k < c.theta_gain.size(); ++k) c.theta_gain[k] += perturb(rng);
  auto law = std::make_shared<OesLaw>(c, plant);
  const OdeField f = [&](double t, Eigen::Ref<const Eigen::VectorXd> x,
                         Eigen::Ref<Eigen::VectorXd> dx) {
    dx[0] = x[1] / plant.J;
    dx[1] = -plant.potential_grad(x[0]) - plant.beta * x[1] / plant.J +
            law->control(t, x[0], x[1]);
  };
  SolverConfig tight;
  tight.rtol = tight.atol = 1e-10;
  double worst_gap = 0.0;
  for (const auto& x0 : {Eigen::Vector2d(2.5, -1.0), Eigen::Vector2d(-1.0, 2.0),
                         Eigen::Vector2d(0.5, 0.5)}) {
    const Trajectory a = dopri5_integrate(f, x0, 0.0, 3.0, tight);
    const Trajectory b = rk4_integrate(f, x0, 0.0, 3.0, 30000);  // h = 1e-4
    worst_gap =
        std::max(worst_gap, (a.final_state() - b.final_state()).cwiseAbs().maxCoeff());
  }

  // (b) energy drift of the lossless open loop over T = 10 at 1e-8
  PendulumParams lossless = plant;
  lossless.beta = 0.0;
  const OdeField open_loop = [&](double, Eigen::Ref<const Eigen::VectorXd> x,
                                 Eigen::Ref<Eigen::VectorXd> dx) {
    dx[0] = x[1] / lossless.J;
    dx[1] = -lossless.potential_grad(x[0]);
  };
  SolverConfig cfg8;
  cfg8.rtol = cfg8.atol = 1e-8;
  double worst_drift = 0.0;
  for (const auto& x0 : {Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.8, 0.5),
                         Eigen::Vector2d(-1.2, 0.3), Eigen::Vector2d(0.5, -1.0)}) {
    const Trajectory traj = dopri5_integrate(open_loop, x0, 0.0, 10.0, cfg8);
    const double h0 = lossless.hamiltonian(x0[0], x0[1]);
    const double hT =
        lossless.hamiltonian(traj.final_state()[0], traj.final_state()[1]);
    worst_drift = std::max(worst_drift, std::abs(hT - h0));
  }

  detail = "max closed-loop state gap " + format_g17(worst_gap) +
           " (bound 1e-6); max energy drift " + format_g17(worst_drift) +
           " (bound 1e-6)";
  return worst_gap < 1e-6 && worst_drift < 1e-6;
}

bool criterion_10(std::string& detail) {
  PendulumParams plant;
  std::mt19937_64 rng(515151);
  const OesController c =
      make_oes_controller(paper_arch(), 3.0, false, rng, InitMode::ZeroControl);
  auto law = std::make_shared<OesLaw>(c, plant);

  const OdeField open_loop = [&](double, Eigen::Ref<const Eigen::VectorXd> x,
                                 Eigen::Ref<Eigen::VectorXd> dx) {
    dx[0] = x[1] / plant.J;
    dx[1] = -plant.potential_grad(x[0]) - plant.beta * x[1] / plant.J;
  };
  const OdeField closed_loop = [&](double t, Eigen::Ref<const Eigen::VectorXd> x,
                                   Eigen::Ref<Eigen::VectorXd> dx) {
    open_loop(t, x, dx);
    dx[1] += law->control(t, x[0], x[1]);
  };

  SolverConfig cfg;
  cfg.rtol = cfg.atol = kEvalTol;
  const double bound = 100.0 * (cfg.rtol + cfg.atol);
  std::uniform_real_distribution<double> box(-2.0 * kPi, 2.0 * kPi);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector2d x0(box(rng), box(rng));
    const Trajectory a = dopri5_integrate(open_loop, x0, 0.0, 3.0, cfg);
    const Trajectory b = dopri5_integrate(closed_loop, x0, 0.0, 3.0, cfg);
    worst = std::max(worst, (a.final_state() - b.final_state()).norm());
  }
  detail = "max open/closed terminal gap " + format_g17(worst) + " over 50 draws (bound " +
           format_g17(bound) + ")";
  return worst < bound;
}

struct CriterionEntry {
  int id;
  const char* name;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, skip;
  g_workers = static_cast<int>(
      std::max(1u, std::thread::hardware_concurrency()));
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto parse_list = [](const char* text, std::set<int>& out) {
      int value = 0;
      bool have = false;
      for (const char* p = text;; ++p) {
        if (*p >= '0' && *p <= '9') {
          value = value * 10 + (*p - '0');
          have = true;
        } else {
          if (have) out.insert(value);
          value = 0;
          have = false;
          if (!*p) break;
        }
      }
    };
    if (arg == "--only" && i + 1 < argc) {
      parse_list(argv[++i], only);
    } else if (arg == "--skip" && i + 1 < argc) {
      parse_list(argv[++i], skip);
    } else if (arg == "--workers" && i + 1 < argc) {
      g_workers = std::atoi(argv[++i]);
    } else if (arg == "--out" && i + 1 < argc) {
      g_out = argv[++i];
    } else {
      std::fprintf(stderr,
                   "usage: acceptance [--only LIST] [--skip LIST] [--workers N] "
                   "[--out DIR]\n");
      return 64;
    }
  }

  const std::vector<CriterionEntry> criteria = {
      {1, "costate gradient matches finite differences", criterion_1},
      {2, "matching equations hold for shaped potentials", criterion_2},
      {3, "shaped energy never increases in closed loop", criterion_3},
      {4, "certified bound on the shaped potential", criterion_4},
      {5, "regulation benchmark at desk scale", criterion_5},
      {6, "PD baseline gains", criterion_6},
      {7, "cost-tradeoff sweep dominance", criterion_7},
      {8, "set-point generalization", criterion_8},
      {9, "solver cross-validation", criterion_9},
      {10, "zero initialization reproduces the open loop", criterion_10},
  };

  int failures = 0;
  for (const auto& entry : criteria) {
    if (!only.empty() && !only.count(entry.id)) continue;
    if (skip.count(entry.id)) {
      std::printf("[SKIP] criterion %d: %s\n", entry.id, entry.name);
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = entry.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %d: %s (%.1fs)\n       %s\n", ok ? "PASS" : "FAIL",
                entry.id, entry.name, secs, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
