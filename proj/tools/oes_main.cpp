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

// Command-line front end: train controllers, evaluate checkpoints, export
// potential/gain landscapes and run the cost-tradeoff sweep. All outputs
// are UTF-8 CSV with 17-significant-digit floats; every command is
// deterministic given (config, seed, worker count).

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "oes/config.hpp"
#include "oes/util.hpp"

namespace fs = std::filesystem;
using namespace oes;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out_dir;
  std::string tolerance;  // "rtol:atol"
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* config = cmd->add_option("--config", args.config_path, "experiment config (JSON)")
                     ->envname("OES_CONFIG");
  if (config_required) config->required();
  cmd->add_option("--seed", args.seed, "override the config seed")->envname("OES_SEED");
  cmd->add_option("--workers", args.workers, "parallel rollout workers")
      ->envname("OES_WORKERS");
  cmd->add_option("--out", args.out_dir, "output directory")->envname("OES_OUT");
  cmd->add_option("--tolerance", args.tolerance,
                  "solver tolerances as RTOL:ATOL (train: training solver; "
                  "eval/landscape/pareto: evaluation solver)")
      ->envname("OES_TOLERANCE");
}

ExperimentConfig load_config(const CommonArgs& args) {
  ExperimentConfig cfg = args.config_path.empty()
                             ? ExperimentConfig::from_text("{}", "<defaults>")
                             : ExperimentConfig::from_file(args.config_path);
  if (args.seed) cfg.train.seed = *args.seed;
  if (args.workers) cfg.train.workers = *args.workers;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (!args.tolerance.empty()) {
    const auto colon = args.tolerance.find(':');
    if (colon == std::string::npos) {
      throw ConfigError("--tolerance expects RTOL:ATOL");
    }
    const double rtol = std::stod(args.tolerance.substr(0, colon));
    const double atol = std::stod(args.tolerance.substr(colon + 1));
    cfg.train.solver.rtol = rtol;
    cfg.train.solver.atol = atol;
    cfg.eval_solver.rtol = rtol;
    cfg.eval_solver.atol = atol;
  }
  return cfg;
}

std::ofstream open_csv(const fs::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return os;
}

void write_manifest(const fs::path& path, const ExperimentConfig& cfg,
                    const std::string& command, const nlohmann::json& extra) {
  nlohmann::json j;
  j["tool"] = "oes";
  j["version"] = kVersion;
  j["command"] = command;
  j["config_hash"] = cfg.config_hash;
  j["seed"] = cfg.train.seed;
  j["workers"] = cfg.train.workers;
  j["solver"] = {{"rtol", cfg.train.solver.rtol}, {"atol", cfg.train.solver.atol}};
  j["eval_solver"] = {{"rtol", cfg.eval_solver.rtol}, {"atol", cfg.eval_solver.atol}};
  j.update(extra);
  std::ofstream os(path, std::ios::trunc);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing '" + path.string() + "'");
}

int cmd_train(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);

  std::ofstream metrics = open_csv(out / "metrics.csv");
  metrics << "iter,loss,terminal,integral,wallclock_s\n";

  TrainHooks hooks;
  hooks.on_iteration = [&metrics](const IterationRow& row) {
    metrics << row.iter << ',' << format_g17(row.loss) << ',' << format_g17(row.terminal)
            << ',' << format_g17(row.integral) << ',' << format_g17(row.wallclock_s)
            << '\n';
  };
  hooks.on_checkpoint = [&](int iter, const Checkpoint& ck) {
    if (iter < 0) {
      save_checkpoint((out / "checkpoint.json").string(), ck);
    } else if (iter > 0) {
      save_checkpoint(
          (out / ("checkpoint_iter" + std::to_string(iter) + ".json")).string(), ck);
    }
  };

  const TrainResult result = train(cfg.train, hooks);
  metrics.close();

  nlohmann::json extra;
  extra["iterations_run"] = result.log.size();
  extra["stopped_early"] = result.stopped_early;
  extra["failed_rollouts"] = result.failed_rollouts;
  extra["skipped_updates"] = result.skipped_updates;
  if (result.checkpoint.type == Checkpoint::Type::PdPlus) {
    extra["converged_gains"] = {{"k_p", result.checkpoint.pd.k_p},
                                {"k_d", result.checkpoint.pd.k_d}};
  }
  if (!result.log.empty()) {
    extra["final_loss"] = result.log.back().loss;
    extra["final_terminal"] = result.log.back().terminal;
    extra["final_integral"] = result.log.back().integral;
  }
  write_manifest(out / "manifest.json", cfg, "train", extra);
  std::cout << "wrote " << (out / "checkpoint.json").string() << " and metrics.csv ("
            << result.log.size() << " iterations)\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path, int n,
             const std::vector<double>& qstars, bool export_trajectories) {
  const ExperimentConfig cfg = load_config(args);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);

  const bool conditioned =
      ckpt.type == Checkpoint::Type::Oes && ckpt.oes.setpoint_conditioned;
  CostSpec cost = cfg.train.cost;
  if (conditioned && cost.variant != CostSpec::Variant::SetpointQuadratic) {
    cost.variant = CostSpec::Variant::SetpointQuadratic;
    cost.horizon = ckpt.oes.horizon;
    cost.gamma = 1.0;
  }

  SamplerConfig sampler = cfg.train.sampler;
  sampler.batch = n;
  sampler.seed = cfg.eval_seed;
  std::mt19937_64 rng(sampler.seed);
  const Batch batch = sample_batch(sampler, rng, false);

  std::vector<RolloutRequest> requests;
  for (const auto& x0 : batch.initial_states) {
    if (conditioned && !qstars.empty()) {
      for (double qs : qstars) {
        requests.push_back({x0, Eigen::Vector2d(qs, 0.0)});
      }
    } else {
      RolloutRequest req;
      req.x0 = x0;
      req.target = Eigen::Vector2d(cost.q_star, 0.0);
      requests.push_back(req);
    }
  }

  const EvalSummary summary =
      evaluate(ckpt, cost, requests, cfg.eval_solver, cfg.train.workers);

  std::ofstream os = open_csv(out / "summary.csv");
  os << "q0,p0,qT,pT,target_q,terminal,integral\n";
  for (const auto& row : summary.rows) {
    os << format_g17(row.x0[0]) << ',' << format_g17(row.x0[1]) << ','
       << format_g17(row.xT[0]) << ',' << format_g17(row.xT[1]) << ','
       << format_g17(row.target_q) << ',' << format_g17(row.terminal) << ','
       << format_g17(row.integral) << '\n';
  }
  os.close();

  if (export_trajectories) {
    for (std::size_t i = 0; i < requests.size(); ++i) {
      std::shared_ptr<PendulumLaw> law;
      if (ckpt.type == Checkpoint::Type::Oes) {
        law = std::make_shared<OesLaw>(ckpt.oes, ckpt.plant, requests[i].target[0]);
      } else {
        law = std::make_shared<PdPlusLaw>(ckpt.pd);
      }
      const AdjointProblem problem =
          make_pendulum_problem(ckpt.plant, law, cost.rollout(requests[i].target),
                                cost.horizon, cfg.eval_solver);
      const LossResult res = loss(problem, requests[i].x0, true);
      char name[64];
      std::snprintf(name, sizeof(name), "traj_%03zu.csv", i);
      write_trajectory_csv((out / name).string(), res.trajectory,
                           [&law](double t, const Eigen::VectorXd& x) {
                             return Eigen::VectorXd::Constant(
                                 1, law->control(t, x[0], x[1]));
                           });
    }
  }

  nlohmann::json extra;
  extra["checkpoint"] = checkpoint_path;
  extra["n_trajectories"] = requests.size();
  extra["terminal_mean"] = summary.terminal_mean;
  extra["integral_mean"] = summary.integral_mean;
  write_manifest(out / "eval_manifest.json", cfg, "eval", extra);

  std::cout << "evaluated " << requests.size() << " rollouts: terminal mean "
            << format_g17(summary.terminal_mean) << ", integral mean "
            << format_g17(summary.integral_mean) << '\n';
  return 0;
}

int cmd_landscape(const CommonArgs& args, const std::string& checkpoint_path,
                  int grid_n, double q_lo, double q_hi, double p_lo, double p_hi,
                  const std::vector<double>& t_slices,
                  const std::vector<double>& qstar_slices, bool emit_plot_script) {
  const ExperimentConfig cfg = load_config(args);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  if (ckpt.type != Checkpoint::Type::Oes) {
    throw std::runtime_error("landscape export needs an energy-shaping checkpoint");
  }
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  const OesController& c = ckpt.oes;
  const PendulumParams& plant = ckpt.plant;

  auto q_at = [&](int i) { return q_lo + (q_hi - q_lo) * i / (grid_n - 1); };
  auto p_at = [&](int i) { return p_lo + (p_hi - p_lo) * i / (grid_n - 1); };

  if (!c.setpoint_conditioned) {
    std::ofstream pot = open_csv(out / "potential.csv");
    pot << "q,plant_potential,shaped_potential\n";
    for (int i = 0; i < grid_n; ++i) {
      const double q = q_at(i);
      const double vstar = mlp_forward(c.potential_spec, c.theta_potential,
                                       Eigen::VectorXd::Constant(1, q))[0];
      pot << format_g17(q) << ',' << format_g17(plant.potential(q)) << ','
          << format_g17(plant.potential(q) + vstar) << '\n';
    }

    for (double t : t_slices) {
      char name[64];
      std::snprintf(name, sizeof(name), "gain_t%g.csv", t);
      std::ofstream os = open_csv(out / name);
      os << "q,p,gain\n";
      for (int i = 0; i < grid_n; ++i) {
        for (int j = 0; j < grid_n; ++j) {
          const Eigen::VectorXd in =
              c.gain_input(t, Eigen::VectorXd::Constant(1, q_at(i)),
                           Eigen::VectorXd::Constant(1, p_at(j)), 0.0);
          os << format_g17(q_at(i)) << ',' << format_g17(p_at(j)) << ','
             << format_g17(mlp_forward(c.gain_spec, c.theta_gain, in)[0]) << '\n';
        }
      }
    }
  } else {
    std::ofstream pot = open_csv(out / "potential_qstar.csv");
    pot << "q,q_star,shaped_potential\n";
    for (int i = 0; i < grid_n; ++i) {
      for (int j = 0; j < grid_n; ++j) {
        const double q = q_at(i), qs = q_at(j);
        Eigen::VectorXd in(2);
        in << q, qs;
        const double vstar = mlp_forward(c.potential_spec, c.theta_potential, in)[0];
        pot << format_g17(q) << ',' << format_g17(qs) << ','
            << format_g17(plant.potential(q) + vstar) << '\n';
      }
    }
    for (double qs : qstar_slices) {
      char name[64];
      std::snprintf(name, sizeof(name), "gain_qstar%g.csv", qs);
      std::ofstream os = open_csv(out / name);
      os << "q,p,gain\n";
      for (int i = 0; i < grid_n; ++i) {
        for (int j = 0; j < grid_n; ++j) {
          const Eigen::VectorXd in =
              c.gain_input(0.0, Eigen::VectorXd::Constant(1, q_at(i)),
                           Eigen::VectorXd::Constant(1, p_at(j)), qs);
          os << format_g17(q_at(i)) << ',' << format_g17(p_at(j)) << ','
             << format_g17(mlp_forward(c.gain_spec, c.theta_gain, in)[0]) << '\n';
        }
      }
    }
  }

  if (emit_plot_script) {
    std::ofstream py = open_csv(out / "plot.py");
    py << R"py(#!/usr/bin/env python3
"""Renders the landscape CSV files next to this script."""
import csv
import glob
import os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))

def load(path):
    with open(path) as f:
        rows = list(csv.DictReader(f))
    return {k: [float(r[k]) for r in rows] for k in rows[0]}

pot = os.path.join(here, "potential.csv")
if os.path.exists(pot):
    d = load(pot)
    plt.figure()
    plt.plot(d["q"], d["plant_potential"], label="plant")
    plt.plot(d["q"], d["shaped_potential"], label="shaped")
    plt.xlabel("q [rad]"); plt.ylabel("V [J]"); plt.legend()
    plt.savefig(os.path.join(here, "potential.png"), dpi=150)

for path in sorted(glob.glob(os.path.join(here, "gain_*.csv"))):
    d = load(path)
    plt.figure()
    plt.tricontourf(d["q"], d["p"], d["gain"], levels=30)
    plt.colorbar(label="gain")
    plt.xlabel("q [rad]"); plt.ylabel("p")
    plt.savefig(path.replace(".csv", ".png"), dpi=150)
print("wrote figures next to the CSV files")
)py";
  }

  std::cout << "wrote landscape grids to " << out.string() << '\n';
  return 0;
}

int cmd_pareto(const CommonArgs& args) {
  const ExperimentConfig cfg = load_config(args);
  if (cfg.pareto_seeds.empty() && !cfg.pareto_gammas.empty()) {
    throw ConfigError("pareto sweep needs a nonempty 'pareto.seeds' list");
  }
  const fs::path out(cfg.output_dir);
  fs::create_directories(out);

  std::ofstream os = open_csv(out / "pareto.csv");
  os << "method,gamma,seed,terminal,integral,status\n";
  const auto table = pareto_sweep(
      cfg.train, cfg.pareto_gammas, cfg.pareto_seeds, cfg.eval_batch, cfg.eval_seed,
      cfg.eval_solver, [&os](const ParetoEntry& e) {
        os << e.method << ',' << format_g17(e.gamma) << ',' << e.seed << ','
           << format_g17(e.terminal) << ',' << format_g17(e.integral) << ',' << e.status
           << '\n';
        os.flush();
        std::cout << e.method << " gamma=" << e.gamma << " seed=" << e.seed << " -> ("
                  << e.terminal << ", " << e.integral << ") " << e.status << std::endl;
      });
  os.close();

  // per-gamma mean points and the dominance flag
  std::ofstream sum = open_csv(out / "pareto_summary.csv");
  sum << "gamma,oes_terminal,oes_integral,pd_terminal,pd_integral,oes_dominated\n";
  bool any_dominated = false;
  for (double gamma : cfg.pareto_gammas) {
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
    if (on == 0 || pn == 0) continue;
    ot /= on;
    oi /= on;
    pt /= pn;
    pi /= pn;
    const bool dominated = pt <= ot && pi <= oi && (pt < ot || pi < oi);
    any_dominated = any_dominated || dominated;
    sum << format_g17(gamma) << ',' << format_g17(ot) << ',' << format_g17(oi) << ','
        << format_g17(pt) << ',' << format_g17(pi) << ',' << (dominated ? 1 : 0) << '\n';
  }
  sum.close();

  write_manifest(out / "pareto_manifest.json", cfg, "pareto",
                 {{"rows", table.size()}, {"oes_dominated_anywhere", any_dominated}});
  std::cout << (any_dominated ? "OES mean point dominated at some gamma"
                              : "OES mean point not dominated at any gamma")
            << "; table in " << (out / "pareto.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal energy shaping for port-Hamiltonian systems"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, land_args, pareto_args;

  auto* train_cmd = app.add_subcommand("train", "train a controller from a config");
  add_common(train_cmd, train_args, true);

  auto* eval_cmd =
      app.add_subcommand("eval", "integrate fresh rollouts from a checkpoint");
  add_common(eval_cmd, eval_args, false);
  std::string eval_checkpoint;
  int eval_n = 50;
  std::vector<double> eval_qstars;
  bool eval_export = false;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON path")
      ->required();
  eval_cmd->add_option("--n", eval_n, "number of fresh initial conditions");
  eval_cmd->add_option("--qstar", eval_qstars,
                       "set points for conditioned controllers (repeatable)");
  eval_cmd->add_flag("--trajectories", eval_export, "write one CSV per rollout");

  auto* land_cmd =
      app.add_subcommand("landscape", "export potential and gain grids as CSV");
  add_common(land_cmd, land_args, false);
  std::string land_checkpoint;
  int grid_n = 101;
  double q_lo = -2.0 * M_PI, q_hi = 2.0 * M_PI, p_lo = -2.0 * M_PI, p_hi = 2.0 * M_PI;
  std::vector<double> t_slices{0.0, 1.5, 3.0};
  std::vector<double> qstar_slices{-1.0, 0.0, 1.0};
  bool plot_script = false;
  land_cmd->add_option("--checkpoint", land_checkpoint, "checkpoint JSON path")
      ->required();
  land_cmd->add_option("--grid", grid_n, "grid points per axis")
      ->check(CLI::Range(2, 4001));
  land_cmd->add_option("--q-min", q_lo, "grid lower bound for q");
  land_cmd->add_option("--q-max", q_hi, "grid upper bound for q");
  land_cmd->add_option("--p-min", p_lo, "grid lower bound for p");
  land_cmd->add_option("--p-max", p_hi, "grid upper bound for p");
  land_cmd->add_option("--t-slices", t_slices, "time slices for the gain grids");
  land_cmd->add_option("--qstar-slices", qstar_slices,
                       "set-point slices for conditioned controllers");
  land_cmd->add_flag("--plot-script", plot_script, "emit a companion plot.py");

  auto* pareto_cmd =
      app.add_subcommand("pareto", "train both methods over the config's gamma grid");
  add_common(pareto_cmd, pareto_args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_args, eval_checkpoint, eval_n, eval_qstars, eval_export);
    }
    if (land_cmd->parsed()) {
      return cmd_landscape(land_args, land_checkpoint, grid_n, q_lo, q_hi, p_lo, p_hi,
                           t_slices, qstar_slices, plot_script);
    }
    if (pareto_cmd->parsed()) return cmd_pareto(pareto_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
