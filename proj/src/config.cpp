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

#include "oes/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oes/util.hpp"

namespace oes {
namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (key == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + where + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const std::string& where, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + where + key + "': " + e.what());
  }
}

void read_range(const json& obj, const std::string& where, const char* key, double& lo,
                double& hi) {
  if (!obj.contains(key)) return;
  std::vector<double> range;
  read(obj, where, key, range);
  if (range.size() != 2 || !(range[0] < range[1])) {
    throw ConfigError("'" + where + key + "' must be [lo, hi] with lo < hi");
  }
  lo = range[0];
  hi = range[1];
}

std::vector<Activation> read_activations(const json& obj, const std::string& where,
                                         const char* key,
                                         std::vector<Activation> fallback) {
  if (!obj.contains(key)) return fallback;
  std::vector<std::string> names;
  read(obj, where, key, names);
  std::vector<Activation> acts;
  acts.reserve(names.size());
  for (const auto& n : names) {
    try {
      acts.push_back(activation_from_string(n));
    } catch (const std::exception& e) {
      throw ConfigError("bad value in '" + where + key + "': " + e.what());
    }
  }
  return acts;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return from_text(buffer.str(), path);
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text,
                                             const std::string& name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    // e.what() carries "parse error at line L, column C: ..."
    throw ConfigError(name + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError(name + ": top level must be an object");

  ExperimentConfig cfg;
  cfg.config_hash = fnv1a64(text);
  TrainConfig& t = cfg.train;

  try {
    require_keys(root, "",
                 {"experiment", "mode", "plant", "cost", "sampler", "solver", "eval",
                  "controller", "optimizer", "pareto", "output_dir", "workers", "seed"});

    std::string experiment = "regulation";
    read(root, "", "experiment", experiment);
    if (experiment == "regulation") {
      t.cost.variant = CostSpec::Variant::RegulationNll;
    } else if (experiment == "setpoint") {
      t.cost.variant = CostSpec::Variant::SetpointQuadratic;
    } else {
      throw ConfigError("'experiment' must be 'regulation' or 'setpoint'");
    }

    std::string mode = "oes";
    read(root, "", "mode", mode);
    if (mode == "oes") {
      t.mode = TrainConfig::Mode::Oes;
    } else if (mode == "pdplus") {
      t.mode = TrainConfig::Mode::PdPlus;
    } else {
      throw ConfigError("'mode' must be 'oes' or 'pdplus'");
    }

    if (root.contains("plant")) {
      const json& j = root["plant"];
      require_keys(j, "plant.", {"m", "r", "k", "beta", "J", "gravity"});
      read(j, "plant.", "m", t.plant.m);
      read(j, "plant.", "r", t.plant.r);
      read(j, "plant.", "k", t.plant.k);
      read(j, "plant.", "beta", t.plant.beta);
      read(j, "plant.", "J", t.plant.J);
      read(j, "plant.", "gravity", t.plant.gravity);
    }

    if (root.contains("cost")) {
      const json& j = root["cost"];
      require_keys(j, "cost.",
                   {"gamma", "sigma2", "q_star", "Q", "horizon", "smoothing_eps"});
      read(j, "cost.", "gamma", t.cost.gamma);
      read(j, "cost.", "sigma2", t.cost.sigma2);
      read(j, "cost.", "q_star", t.cost.q_star);
      read(j, "cost.", "horizon", t.cost.horizon);
      read(j, "cost.", "smoothing_eps", t.cost.smoothing_eps);
      if (j.contains("Q")) {
        std::vector<double> q;
        read(j, "cost.", "Q", q);
        if (q.size() != 2) throw ConfigError("'cost.Q' must have two diagonal entries");
        t.cost.Q = Eigen::Vector2d(q[0], q[1]);
      }
    }

    if (root.contains("sampler")) {
      const json& j = root["sampler"];
      require_keys(j, "sampler.",
                   {"q_range", "p_range", "qstar_range", "pstar_range", "batch",
                    "setpoint_samples", "seed"});
      read_range(j, "sampler.", "q_range", t.sampler.q_min, t.sampler.q_max);
      read_range(j, "sampler.", "p_range", t.sampler.p_min, t.sampler.p_max);
      read_range(j, "sampler.", "qstar_range", t.sampler.qstar_min, t.sampler.qstar_max);
      read_range(j, "sampler.", "pstar_range", t.sampler.pstar_min, t.sampler.pstar_max);
      read(j, "sampler.", "batch", t.sampler.batch);
      read(j, "sampler.", "setpoint_samples", t.sampler.setpoint_samples);
      read(j, "sampler.", "seed", t.sampler.seed);
    }

    if (root.contains("solver")) {
      const json& j = root["solver"];
      require_keys(j, "solver.",
                   {"rtol", "atol", "initial_step", "max_steps", "safety", "min_scale",
                    "max_scale", "beta"});
      read(j, "solver.", "rtol", t.solver.rtol);
      read(j, "solver.", "atol", t.solver.atol);
      read(j, "solver.", "initial_step", t.solver.initial_step);
      read(j, "solver.", "max_steps", t.solver.max_steps);
      read(j, "solver.", "safety", t.solver.safety);
      read(j, "solver.", "min_scale", t.solver.min_scale);
      read(j, "solver.", "max_scale", t.solver.max_scale);
      read(j, "solver.", "beta", t.solver.beta);
    } else {
      t.solver.rtol = 1e-5;  // training default, tightened for evaluation
      t.solver.atol = 1e-5;
    }

    cfg.eval_solver.rtol = 1e-8;
    cfg.eval_solver.atol = 1e-8;
    if (root.contains("eval")) {
      const json& j = root["eval"];
      require_keys(j, "eval.", {"rtol", "atol", "batch", "seed"});
      read(j, "eval.", "rtol", cfg.eval_solver.rtol);
      read(j, "eval.", "atol", cfg.eval_solver.atol);
      read(j, "eval.", "batch", cfg.eval_batch);
      read(j, "eval.", "seed", cfg.eval_seed);
    }

    if (root.contains("controller")) {
      const json& j = root["controller"];
      require_keys(j, "controller.",
                   {"potential_hidden", "potential_activations", "gain_hidden",
                    "gain_activations", "gain_output_bias", "init"});
      read(j, "controller.", "gain_output_bias", t.architecture.gain_output_bias);
      read(j, "controller.", "potential_hidden", t.architecture.potential_hidden);
      t.architecture.potential_activations =
          read_activations(j, "controller.", "potential_activations",
                           t.architecture.potential_activations);
      read(j, "controller.", "gain_hidden", t.architecture.gain_hidden);
      t.architecture.gain_activations = read_activations(
          j, "controller.", "gain_activations", t.architecture.gain_activations);
      if (j.contains("init")) {
        std::string init;
        read(j, "controller.", "init", init);
        t.init = init_mode_from_string(init);
      }
    }

    if (root.contains("optimizer")) {
      const json& j = root["optimizer"];
      require_keys(j, "optimizer.",
                   {"learning_rate", "beta1", "beta2", "eps", "iterations",
                    "checkpoint_interval", "stop_rel_change", "stop_window"});
      read(j, "optimizer.", "learning_rate", t.learning_rate);
      read(j, "optimizer.", "beta1", t.adam_beta1);
      read(j, "optimizer.", "beta2", t.adam_beta2);
      read(j, "optimizer.", "eps", t.adam_eps);
      read(j, "optimizer.", "iterations", t.iterations);
      read(j, "optimizer.", "checkpoint_interval", t.checkpoint_interval);
      read(j, "optimizer.", "stop_rel_change", t.stop_rel_change);
      read(j, "optimizer.", "stop_window", t.stop_window);
    }

    if (root.contains("pareto")) {
      const json& j = root["pareto"];
      require_keys(j, "pareto.", {"gammas", "seeds"});
      read(j, "pareto.", "gammas", cfg.pareto_gammas);
      read(j, "pareto.", "seeds", cfg.pareto_seeds);
    }

    read(root, "", "output_dir", cfg.output_dir);
    read(root, "", "workers", t.workers);
    read(root, "", "seed", t.seed);

    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const std::exception& e) {
    throw ConfigError(name + ": " + e.what());
  }
  return cfg;
}

}  // namespace oes
