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

#include "oes/controller.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "oes/util.hpp"

namespace oes {

namespace {

// Gain output bias used by InitMode::ZeroControl; softplus(-40) ~ 4e-18.
constexpr double kGainZeroBias = -40.0;

using nlohmann::json;

json spec_to_json(const MlpSpec& spec) {
  json j;
  j["input_dim"] = spec.input_dim;
  j["output_dim"] = spec.output_dim;
  j["hidden"] = spec.hidden_widths;
  std::vector<std::string> acts;
  acts.reserve(spec.hidden_activations.size());
  for (Activation a : spec.hidden_activations) acts.emplace_back(to_string(a));
  j["activations"] = acts;
  j["output_activation"] = std::string(to_string(spec.output_activation));
  return j;
}

MlpSpec spec_from_json(const json& j) {
  MlpSpec spec;
  spec.input_dim = j.at("input_dim").get<int>();
  spec.output_dim = j.at("output_dim").get<int>();
  spec.hidden_widths = j.at("hidden").get<std::vector<int>>();
  for (const auto& name : j.at("activations").get<std::vector<std::string>>()) {
    spec.hidden_activations.push_back(activation_from_string(name));
  }
  spec.output_activation =
      activation_from_string(j.at("output_activation").get<std::string>());
  spec.validate();
  return spec;
}

json plant_to_json(const PendulumParams& p) {
  return json{{"m", p.m},       {"r", p.r}, {"k", p.k},
              {"beta", p.beta}, {"J", p.J}, {"gravity", p.gravity}};
}

PendulumParams plant_from_json(const json& j) {
  PendulumParams p;
  p.m = j.at("m").get<double>();
  p.r = j.at("r").get<double>();
  p.k = j.at("k").get<double>();
  p.beta = j.at("beta").get<double>();
  p.J = j.at("J").get<double>();
  p.gravity = j.at("gravity").get<double>();
  p.validate();
  return p;
}

}  // namespace

int OesController::param_count() const {
  return potential_spec.param_count() + gain_spec.param_count();
}

ParamVector OesController::packed_params() const {
  ParamVector theta(param_count());
  theta.head(theta_potential.size()) = theta_potential;
  theta.tail(theta_gain.size()) = theta_gain;
  return theta;
}

void OesController::set_packed_params(const ParamVector& theta) {
  if (theta.size() != param_count()) {
    throw std::invalid_argument("packed parameter vector has wrong length");
  }
  theta_potential = theta.head(potential_spec.param_count());
  theta_gain = theta.tail(gain_spec.param_count());
}

Eigen::VectorXd OesController::potential_input(const Eigen::VectorXd& q,
                                               double q_star) const {
  Eigen::VectorXd in(potential_spec.input_dim);
  in.head(q.size()) = q;
  if (setpoint_conditioned) in[q.size()] = q_star;
  return in;
}

Eigen::VectorXd OesController::gain_input(double t, const Eigen::VectorXd& q,
                                          const Eigen::VectorXd& p,
                                          double q_star) const {
  Eigen::VectorXd in(gain_spec.input_dim);
  if (setpoint_conditioned) {
    in.head(q.size()) = q;
    in.segment(q.size(), p.size()) = p;
    in[q.size() + p.size()] = q_star;
  } else {
    in[0] = t / horizon;  // normalized time keeps the input bounded
    in.segment(1, q.size()) = q;
    in.segment(1 + q.size(), p.size()) = p;
  }
  return in;
}

void OesController::validate() const {
  potential_spec.validate();
  gain_spec.validate();
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (potential_spec.output_dim != 1) {
    throw std::invalid_argument("potential network must have a scalar output");
  }
  if (gain_spec.output_activation != Activation::Softplus) {
    throw std::invalid_argument("gain network needs a softplus output activation");
  }
  if (potential_spec.hidden_widths.empty() ||
      potential_spec.hidden_activations.back() != Activation::Tanh) {
    throw std::invalid_argument(
        "potential network needs a bounded (tanh) last hidden activation");
  }
  const int nq = n_q();
  const int extra = setpoint_conditioned ? 1 : 0;
  if (potential_spec.input_dim != nq + extra) {
    throw std::invalid_argument("potential network input dimension mismatch");
  }
  const int gain_in = setpoint_conditioned ? 2 * nq + 1 : 1 + 2 * nq;
  if (gain_spec.input_dim != gain_in) {
    throw std::invalid_argument("gain network input dimension mismatch");
  }
  if (theta_potential.size() != potential_spec.param_count() ||
      theta_gain.size() != gain_spec.param_count()) {
    throw std::invalid_argument("controller parameter vectors have wrong length");
  }
}

InitMode init_mode_from_string(const std::string& name) {
  if (name == "zero_last_layer") return InitMode::ZeroLastLayer;
  if (name == "zero_control") return InitMode::ZeroControl;
  throw std::invalid_argument("unknown init mode '" + name + "'");
}

std::string to_string(InitMode mode) {
  return mode == InitMode::ZeroLastLayer ? "zero_last_layer" : "zero_control";
}

OesController make_oes_controller(const OesArchitecture& arch, double horizon,
                                  bool setpoint_conditioned, std::mt19937_64& rng,
                                  InitMode init) {
  OesController c;
  c.horizon = horizon;
  c.setpoint_conditioned = setpoint_conditioned;

  c.potential_spec.input_dim = setpoint_conditioned ? 2 : 1;
  c.potential_spec.output_dim = 1;
  c.potential_spec.hidden_widths = arch.potential_hidden;
  c.potential_spec.hidden_activations = arch.potential_activations;
  c.potential_spec.output_activation = Activation::Identity;

  c.gain_spec.input_dim = 3;  // (t/T, q, p) or (q, p, q*)
  c.gain_spec.output_dim = 1;
  c.gain_spec.hidden_widths = arch.gain_hidden;
  c.gain_spec.hidden_activations = arch.gain_activations;
  c.gain_spec.output_activation = Activation::Softplus;

  c.theta_potential = xavier_init(c.potential_spec, rng);
  zero_last_layer(c.potential_spec, c.theta_potential);
  c.theta_gain = xavier_init(c.gain_spec, rng);
  zero_last_layer(c.gain_spec, c.theta_gain);
  c.theta_gain[c.theta_gain.size() - 1] =
      init == InitMode::ZeroControl ? kGainZeroBias : arch.gain_output_bias;
  c.validate();
  return c;
}

Eigen::VectorXd oes_control(const OesController& c, const MechanicalPH& plant, double t,
                            const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                            double q_star) {
  const Eigen::VectorXd grad_v =
      mlp_grad_input(c.potential_spec, c.theta_potential, c.potential_input(q, q_star))
          .row(0)
          .head(q.size())
          .transpose();
  const Eigen::VectorXd gains =
      mlp_forward(c.gain_spec, c.theta_gain, c.gain_input(t, q, p, q_star));
  if ((gains.array() < 0.0).any()) {
    throw std::logic_error("damping gain came out negative");
  }
  const Eigen::MatrixXd B = plant.input_matrix;
  const Eigen::VectorXd qdot =
      Eigen::LLT<Eigen::MatrixXd>(plant.inertia(q)).solve(p);
  return -B.partialPivLu().solve(grad_v) - gains.asDiagonal() * (B * qdot);
}

double shaped_energy(const OesController& c, const MechanicalPH& plant,
                     const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                     double q_star) {
  const double vstar =
      mlp_forward(c.potential_spec, c.theta_potential, c.potential_input(q, q_star))[0];
  return plant.hamiltonian(q, p) + vstar;
}

void PdPlusController::validate() const {
  if (k_p < 0.0 || k_d < 0.0) {
    throw std::invalid_argument("PD gains must be nonnegative");
  }
  plant.validate();
}

double pd_plus_control(const PdPlusController& c, double q, double p) {
  return -c.plant.m * c.plant.gravity * c.plant.r * std::sin(q) - c.plant.k * q -
         c.k_p * (q - c.q_star) - c.k_d * p / c.plant.J;
}

Eigen::VectorXd ebpbc_beta(
    const PHSystem& sys,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_H_star,
    const Eigen::VectorXd& x) {
  const Eigen::MatrixXd g = sys.input_map(x);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
  if (qr.rank() != g.cols()) {
    throw std::invalid_argument("input map is column rank deficient");
  }
  const Eigen::VectorXd diff = grad_H_star(x) - sys.energy_grad(x);
  // left pseudo-inverse applied via least squares
  return -qr.solve(sys.interconnection(x).transpose() * diff);
}

Eigen::VectorXd damping_injection(const Eigen::MatrixXd& K, const Eigen::VectorXd& y) {
  if (K.rows() != K.cols() || K.rows() != y.size()) {
    throw std::invalid_argument("gain matrix and output dimensions disagree");
  }
  const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::invalid_argument("damping gain must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
    throw std::invalid_argument("damping gain must be positive semidefinite");
  }
  return -K * y;
}

void save_checkpoint(const std::string& json_path, const Checkpoint& ckpt) {
  namespace fs = std::filesystem;
  json j;
  j["format"] = "oes-checkpoint";
  j["version"] = 1;
  j["plant"] = plant_to_json(ckpt.plant);
  const fs::path base = fs::path(json_path);
  const std::string stem = (base.parent_path() / base.stem()).string();
  if (ckpt.type == Checkpoint::Type::Oes) {
    ckpt.oes.validate();
    j["type"] = "oes";
    j["horizon"] = ckpt.oes.horizon;
    j["setpoint_conditioned"] = ckpt.oes.setpoint_conditioned;
    j["potential"] = spec_to_json(ckpt.oes.potential_spec);
    j["gain"] = spec_to_json(ckpt.oes.gain_spec);
    save_params(stem + "_potential.params", ckpt.oes.potential_spec,
                ckpt.oes.theta_potential);
    save_params(stem + "_gain.params", ckpt.oes.gain_spec, ckpt.oes.theta_gain);
  } else {
    ckpt.pd.validate();
    j["type"] = "pdplus";
    j["k_p"] = ckpt.pd.k_p;
    j["k_d"] = ckpt.pd.k_d;
    j["q_star"] = ckpt.pd.q_star;
  }
  std::ofstream os(json_path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + json_path + "' for writing");
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing '" + json_path + "'");
}

Checkpoint load_checkpoint(const std::string& json_path) {
  namespace fs = std::filesystem;
  std::ifstream is(json_path);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + json_path + "'");
  json j = json::parse(is);
  if (j.value("format", "") != "oes-checkpoint") {
    throw std::runtime_error("'" + json_path + "' is not a controller checkpoint");
  }
  Checkpoint ckpt;
  ckpt.plant = plant_from_json(j.at("plant"));
  const fs::path base = fs::path(json_path);
  const std::string stem = (base.parent_path() / base.stem()).string();
  const std::string type = j.at("type").get<std::string>();
  if (type == "oes") {
    ckpt.type = Checkpoint::Type::Oes;
    ckpt.oes.horizon = j.at("horizon").get<double>();
    ckpt.oes.setpoint_conditioned = j.at("setpoint_conditioned").get<bool>();
    ckpt.oes.potential_spec = spec_from_json(j.at("potential"));
    ckpt.oes.gain_spec = spec_from_json(j.at("gain"));
    ckpt.oes.theta_potential =
        load_params(stem + "_potential.params", ckpt.oes.potential_spec);
    ckpt.oes.theta_gain = load_params(stem + "_gain.params", ckpt.oes.gain_spec);
    ckpt.oes.validate();
  } else if (type == "pdplus") {
    ckpt.type = Checkpoint::Type::PdPlus;
    ckpt.pd.k_p = j.at("k_p").get<double>();
    ckpt.pd.k_d = j.at("k_d").get<double>();
    ckpt.pd.q_star = j.at("q_star").get<double>();
    ckpt.pd.plant = ckpt.plant;
    ckpt.pd.validate();
  } else {
    throw std::runtime_error("unknown checkpoint type '" + type + "'");
  }
  return ckpt;
}

}  // namespace oes
