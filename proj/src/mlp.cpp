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

#include "oes/mlp.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "oes/util.hpp"

namespace oes {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstWMap = Eigen::Map<const RowMajor>;
using WMap = Eigen::Map<RowMajor>;
using ConstVMap = Eigen::Map<const Eigen::VectorXd>;
using VMap = Eigen::Map<Eigen::VectorXd>;

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// value, first and second derivative of the activation, elementwise
void activate(Activation act, const Eigen::VectorXd& pre, Eigen::VectorXd& value,
              Eigen::VectorXd& d1, Eigen::VectorXd& d2) {
  const auto n = pre.size();
  value.resize(n);
  d1.resize(n);
  d2.resize(n);
  switch (act) {
    case Activation::Softplus:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double s = sigmoid(pre[i]);
        value[i] = softplus(pre[i]);
        d1[i] = s;
        d2[i] = s * (1.0 - s);
      }
      break;
    case Activation::Tanh:
      for (Eigen::Index i = 0; i < n; ++i) {
        const double t = std::tanh(pre[i]);
        value[i] = t;
        d1[i] = 1.0 - t * t;
        d2[i] = -2.0 * t * (1.0 - t * t);
      }
      break;
    case Activation::Identity:
      value = pre;
      d1.setOnes();
      d2.setZero();
      break;
  }
}

struct LayerOffsets {
  int weight = 0;
  int bias = 0;
  int rows = 0;
  int cols = 0;
};

LayerOffsets layer_offsets(const MlpSpec& spec, int layer) {
  LayerOffsets off;
  int cursor = 0;
  for (int l = 0; l <= layer; ++l) {
    off.rows = spec.layer_output_dim(l);
    off.cols = spec.layer_input_dim(l);
    off.weight = cursor;
    off.bias = cursor + off.rows * off.cols;
    cursor = off.bias + off.rows;
  }
  return off;
}

ConstWMap weights(const MlpSpec& spec, const ParamVector& theta, int layer) {
  const auto off = layer_offsets(spec, layer);
  return ConstWMap(theta.data() + off.weight, off.rows, off.cols);
}

ConstVMap bias(const MlpSpec& spec, const ParamVector& theta, int layer) {
  const auto off = layer_offsets(spec, layer);
  return ConstVMap(theta.data() + off.bias, off.rows);
}

void check_theta(const MlpSpec& spec, const ParamVector& theta) {
  if (theta.size() != spec.param_count()) {
    throw std::invalid_argument("parameter vector has length " +
                                std::to_string(theta.size()) + ", architecture needs " +
                                std::to_string(spec.param_count()));
  }
}

Activation hidden_act(const MlpSpec& spec, int layer) {
  return spec.hidden_activations[static_cast<std::size_t>(layer)];
}

}  // namespace

Activation activation_from_string(std::string_view name) {
  if (name == "softplus") return Activation::Softplus;
  if (name == "tanh") return Activation::Tanh;
  if (name == "none" || name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Softplus: return "softplus";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "none";
  }
  return "?";
}

int MlpSpec::layer_input_dim(int layer) const {
  return layer == 0 ? input_dim : hidden_widths[static_cast<std::size_t>(layer - 1)];
}

int MlpSpec::layer_output_dim(int layer) const {
  return layer == static_cast<int>(hidden_widths.size())
             ? output_dim
             : hidden_widths[static_cast<std::size_t>(layer)];
}

int MlpSpec::param_count() const {
  int count = 0;
  for (int l = 0; l < layer_count(); ++l) {
    count += layer_output_dim(l) * (layer_input_dim(l) + 1);
  }
  return count;
}

std::string MlpSpec::describe() const {
  std::ostringstream os;
  os << "mlp in=" << input_dim << " out=" << output_dim << " hidden=";
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    os << (i ? "," : "") << hidden_widths[i];
  }
  os << " act=";
  for (std::size_t i = 0; i < hidden_activations.size(); ++i) {
    os << (i ? "," : "") << to_string(hidden_activations[i]);
  }
  os << " outact=" << to_string(output_activation);
  return os.str();
}

std::uint64_t MlpSpec::hash() const { return fnv1a64(describe()); }

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) {
    throw std::invalid_argument("network input/output dimensions must be positive");
  }
  if (hidden_activations.size() != hidden_widths.size()) {
    throw std::invalid_argument("need one activation per hidden layer");
  }
  for (int w : hidden_widths) {
    if (w <= 0) throw std::invalid_argument("hidden widths must be positive");
  }
  for (Activation a : hidden_activations) {
    if (a == Activation::Identity) {
      throw std::invalid_argument("hidden activations must be softplus or tanh");
    }
  }
  if (output_activation == Activation::Tanh) {
    throw std::invalid_argument("output activation must be none or softplus");
  }
}

void mlp_forward_tape(const MlpSpec& spec, const ParamVector& theta,
                      const Eigen::VectorXd& z, MlpTape& tape) {
  check_theta(spec, theta);
  if (z.size() != spec.input_dim) {
    throw std::invalid_argument("network input has dimension " + std::to_string(z.size()) +
                                ", expected " + std::to_string(spec.input_dim));
  }
  if (!z.allFinite()) throw std::invalid_argument("network input is not finite");

  const int layers = spec.layer_count();
  tape.pre.resize(static_cast<std::size_t>(layers));
  tape.post.resize(static_cast<std::size_t>(layers) + 1);
  tape.d1.resize(static_cast<std::size_t>(layers));
  tape.d2.resize(static_cast<std::size_t>(layers));
  tape.post[0] = z;
  for (int l = 0; l < layers; ++l) {
    auto& pre = tape.pre[static_cast<std::size_t>(l)];
    pre.noalias() = weights(spec, theta, l) * tape.post[static_cast<std::size_t>(l)];
    pre += bias(spec, theta, l);
    const Activation act =
        l + 1 < layers ? hidden_act(spec, l) : spec.output_activation;
    activate(act, pre, tape.post[static_cast<std::size_t>(l) + 1],
             tape.d1[static_cast<std::size_t>(l)], tape.d2[static_cast<std::size_t>(l)]);
  }
  tape.out = tape.post.back();
}

Eigen::VectorXd mlp_forward(const MlpSpec& spec, const ParamVector& theta,
                            const Eigen::VectorXd& z) {
  MlpTape tape;
  mlp_forward_tape(spec, theta, z, tape);
  return tape.out;
}

Eigen::MatrixXd mlp_grad_input_tape(const MlpSpec& spec, const ParamVector& theta,
                                    MlpTape& tape) {
  const int layers = spec.layer_count();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(spec.input_dim, spec.input_dim);
  for (int l = 0; l < layers; ++l) {
    Eigen::MatrixXd next = weights(spec, theta, l) * jac;
    next.array().colwise() *= tape.d1[static_cast<std::size_t>(l)].array();
    jac.swap(next);
  }
  return jac;
}

Eigen::MatrixXd mlp_grad_input(const MlpSpec& spec, const ParamVector& theta,
                               const Eigen::VectorXd& z) {
  MlpTape tape;
  mlp_forward_tape(spec, theta, z, tape);
  return mlp_grad_input_tape(spec, theta, tape);
}

Eigen::MatrixXd mlp_input_hessian_tape(const MlpSpec& spec, const ParamVector& theta,
                                       MlpTape& tape, int output_index) {
  if (output_index < 0 || output_index >= spec.output_dim) {
    throw std::invalid_argument("output index out of range");
  }
  const int d = spec.input_dim;
  const int layers = spec.layer_count();

  // jac: post-activation first derivatives, hess: per-unit Hessians stored
  // as rows of length d*d (vec of the unit's input Hessian).
  Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(d, d * d);
  for (int l = 0; l < layers; ++l) {
    const auto W = weights(spec, theta, l);
    const auto& d1 = tape.d1[static_cast<std::size_t>(l)];
    const auto& d2 = tape.d2[static_cast<std::size_t>(l)];
    Eigen::MatrixXd jac_pre = W * jac;        // width x d
    Eigen::MatrixXd hess_pre = W * hess;      // width x d*d
    Eigen::MatrixXd hess_next(W.rows(), d * d);
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        hess_next.col(i * d + j) =
            d2.array() * jac_pre.col(i).array() * jac_pre.col(j).array() +
            d1.array() * hess_pre.col(i * d + j).array();
      }
    }
    hess.swap(hess_next);
    jac = d1.asDiagonal() * jac_pre;
  }
  return Eigen::Map<const Eigen::MatrixXd>(hess.row(output_index).data(), d, d);
}

Eigen::MatrixXd mlp_input_hessian(const MlpSpec& spec, const ParamVector& theta,
                                  const Eigen::VectorXd& z, int output_index) {
  MlpTape tape;
  mlp_forward_tape(spec, theta, z, tape);
  return mlp_input_hessian_tape(spec, theta, tape, output_index);
}

void mlp_vjp_params_tape(const MlpSpec& spec, const ParamVector& theta,
                         MlpTape& tape, const Eigen::VectorXd& cotangent,
                         Eigen::Ref<Eigen::VectorXd> result) {
  if (cotangent.size() != spec.output_dim) {
    throw std::invalid_argument("cotangent must have output dimension");
  }
  if (result.size() != spec.param_count()) {
    throw std::invalid_argument("result buffer has wrong length");
  }
  const int layers = spec.layer_count();
  Eigen::VectorXd delta =
      tape.d1[static_cast<std::size_t>(layers - 1)].cwiseProduct(cotangent);
  for (int l = layers - 1; l >= 0; --l) {
    const auto off = layer_offsets(spec, l);
    WMap wgrad(result.data() + off.weight, off.rows, off.cols);
    wgrad.noalias() = delta * tape.post[static_cast<std::size_t>(l)].transpose();
    VMap(result.data() + off.bias, off.rows) = delta;
    if (l > 0) {
      Eigen::VectorXd up = weights(spec, theta, l).transpose() * delta;
      delta = tape.d1[static_cast<std::size_t>(l - 1)].cwiseProduct(up);
    }
  }
}

Eigen::VectorXd mlp_vjp_params(const MlpSpec& spec, const ParamVector& theta,
                               const Eigen::VectorXd& z,
                               const Eigen::VectorXd& cotangent) {
  MlpTape tape;
  mlp_forward_tape(spec, theta, z, tape);
  Eigen::VectorXd result(spec.param_count());
  mlp_vjp_params_tape(spec, theta, tape, cotangent, result);
  return result;
}

void mlp_grad_gradient_vjp_tape(const MlpSpec& spec, const ParamVector& theta,
                                MlpTape& tape, const Eigen::VectorXd& tangent,
                                Eigen::Ref<Eigen::VectorXd> result) {
  if (spec.output_dim != 1) {
    throw std::invalid_argument("mixed second derivative requires a scalar output");
  }
  if (tangent.size() != spec.input_dim) {
    throw std::invalid_argument("tangent must have input dimension");
  }
  if (result.size() != spec.param_count()) {
    throw std::invalid_argument("result buffer has wrong length");
  }
  const int layers = spec.layer_count();

  // Forward tangent sweep: tan_pre[l] = d(pre_l)/d(eps), tan_post[l] likewise
  // for the post-activations, along the input direction `tangent`.
  tape.tan_pre.resize(static_cast<std::size_t>(layers));
  tape.tan_post.resize(static_cast<std::size_t>(layers) + 1);
  tape.tan_post[0] = tangent;
  for (int l = 0; l < layers; ++l) {
    auto& tp = tape.tan_pre[static_cast<std::size_t>(l)];
    tp.noalias() = weights(spec, theta, l) * tape.tan_post[static_cast<std::size_t>(l)];
    tape.tan_post[static_cast<std::size_t>(l) + 1] =
        tape.d1[static_cast<std::size_t>(l)].cwiseProduct(tp);
  }

  // Reverse sweep through the tangent program. adj[l] is the adjoint of
  // post[l], adj_tan[l] the adjoint of tan_post[l], with respect to the
  // scalar phi = d(output)/d(eps).
  Eigen::VectorXd adj_pre;      // adjoint of pre[l]
  Eigen::VectorXd adj_tan_pre;  // adjoint of tan_pre[l]
  Eigen::VectorXd adj_post, adj_tan_post;
  for (int l = layers - 1; l >= 0; --l) {
    const auto& d1 = tape.d1[static_cast<std::size_t>(l)];
    const auto& d2 = tape.d2[static_cast<std::size_t>(l)];
    if (l == layers - 1) {
      // phi = d1_out .* tan_pre (scalar output layer)
      adj_tan_pre = d1;
      adj_pre = d2.cwiseProduct(tape.tan_pre[static_cast<std::size_t>(l)]);
    } else {
      adj_pre = d1.cwiseProduct(adj_post) +
                d2.cwiseProduct(tape.tan_pre[static_cast<std::size_t>(l)])
                    .cwiseProduct(adj_tan_post);
      adj_tan_pre = d1.cwiseProduct(adj_tan_post);
    }
    const auto off = layer_offsets(spec, l);
    WMap wgrad(result.data() + off.weight, off.rows, off.cols);
    wgrad.noalias() = adj_pre * tape.post[static_cast<std::size_t>(l)].transpose();
    wgrad.noalias() +=
        adj_tan_pre * tape.tan_post[static_cast<std::size_t>(l)].transpose();
    VMap(result.data() + off.bias, off.rows) = adj_pre;
    if (l > 0) {
      const auto W = weights(spec, theta, l);
      adj_post.noalias() = W.transpose() * adj_pre;
      adj_tan_post.noalias() = W.transpose() * adj_tan_pre;
    }
  }
}

Eigen::VectorXd mlp_grad_gradient_vjp(const MlpSpec& spec, const ParamVector& theta,
                                      const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& tangent) {
  MlpTape tape;
  mlp_forward_tape(spec, theta, z, tape);
  Eigen::VectorXd result(spec.param_count());
  mlp_grad_gradient_vjp_tape(spec, theta, tape, tangent, result);
  return result;
}

ParamVector xavier_init(const MlpSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  ParamVector theta = ParamVector::Zero(spec.param_count());
  // Implementation-independent uniform draw in [0, 1).
  auto uniform01 = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  for (int l = 0; l < spec.layer_count(); ++l) {
    const auto off = layer_offsets(spec, l);
    const double a = std::sqrt(6.0 / (off.rows + off.cols));
    for (int i = 0; i < off.rows * off.cols; ++i) {
      theta[off.weight + i] = a * (2.0 * uniform01() - 1.0);
    }
    // biases stay zero
  }
  return theta;
}

ParamVector& zero_last_layer(const MlpSpec& spec, ParamVector& theta) {
  check_theta(spec, theta);
  const auto off = layer_offsets(spec, spec.layer_count() - 1);
  theta.segment(off.weight, off.rows * (off.cols + 1)).setZero();
  return theta;
}

double output_bound(const MlpSpec& spec, const ParamVector& theta) {
  check_theta(spec, theta);
  if (spec.output_dim != 1) {
    throw std::invalid_argument("output bound is defined for scalar networks");
  }
  if (spec.output_activation != Activation::Identity) {
    throw std::invalid_argument("output bound requires an affine output layer");
  }
  if (spec.hidden_widths.empty() ||
      spec.hidden_activations.back() != Activation::Tanh) {
    throw std::invalid_argument(
        "output bound requires a bounded (tanh) last hidden activation");
  }
  const int last = spec.layer_count() - 1;
  const auto off = layer_offsets(spec, last);
  double sum = 0.0;
  for (int i = 0; i < off.rows * off.cols; ++i) sum += std::abs(theta[off.weight + i]);
  return sum + std::abs(theta[off.bias]);
}

namespace {

constexpr char kBinaryMagic[9] = "OESPRM01";

void write_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(buf, 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_params(const std::string& path, const MlpSpec& spec,
                 const ParamVector& theta, ParamFormat format) {
  check_theta(spec, theta);
  std::ofstream os(path, format == ParamFormat::Binary
                             ? std::ios::binary | std::ios::trunc
                             : std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  if (format == ParamFormat::Binary) {
    os.write(kBinaryMagic, 8);
    write_u64(os, spec.hash());
    write_u64(os, static_cast<std::uint64_t>(theta.size()));
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      write_u64(os, std::bit_cast<std::uint64_t>(theta[i]));
    }
  } else {
    os << "oes-params 1\n";
    os << std::hex << spec.hash() << std::dec << ' ' << theta.size() << '\n';
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      os << format_g17(theta[i]) << '\n';
    }
  }
  if (!os) throw std::runtime_error("failed writing parameters to '" + path + "'");
}

ParamVector load_params(const std::string& path, const MlpSpec& spec) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is) throw std::runtime_error("'" + path + "' is truncated");
  ParamVector theta;
  std::uint64_t hash = 0;
  std::uint64_t count = 0;
  if (std::memcmp(magic, kBinaryMagic, 8) == 0) {
    hash = read_u64(is);
    count = read_u64(is);
    theta.resize(static_cast<Eigen::Index>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
      theta[static_cast<Eigen::Index>(i)] = std::bit_cast<double>(read_u64(is));
    }
    if (!is) throw std::runtime_error("'" + path + "' is truncated");
  } else {
    is.seekg(0);
    std::string header;
    std::getline(is, header);
    if (header != "oes-params 1") {
      throw std::runtime_error("'" + path + "' is not a parameter checkpoint");
    }
    is >> std::hex >> hash >> std::dec >> count;
    theta.resize(static_cast<Eigen::Index>(count));
    for (std::uint64_t i = 0; i < count; ++i) {
      if (!(is >> theta[static_cast<Eigen::Index>(i)])) {
        throw std::runtime_error("'" + path + "' is truncated");
      }
    }
  }
  if (hash != spec.hash()) {
    throw std::runtime_error("architecture mismatch loading '" + path + "': file " +
                             "was saved for a different network (" + spec.describe() + ")");
  }
  if (count != static_cast<std::uint64_t>(spec.param_count())) {
    throw std::runtime_error("parameter count mismatch loading '" + path + "'");
  }
  return theta;
}

}  // namespace oes
