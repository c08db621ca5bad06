// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/policy.hpp"

#include <cmath>
#include <fstream>

#include "ctrlode/rng.hpp"

namespace ctrlode {

namespace {
constexpr const char* kCheckpointFormat = "ctrlode.policy.v1";

const char* activation_name(Activation a) {
  return a == Activation::Tanh ? "tanh" : "scaled_sigmoid";
}

Activation activation_from_name(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "scaled_sigmoid") return Activation::ScaledSigmoid;
  throw ConfigError("unknown activation '" + s + "' in checkpoint");
}
}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

PolicyNetwork::PolicyNetwork(const std::vector<int>& sizes, Vector lb,
                             Vector ub) {
  if (sizes.size() < 3) {
    throw InvalidShape("policy needs at least one hidden layer");
  }
  for (int s : sizes) {
    if (s < 1) throw InvalidShape("zero-size policy layer");
  }
  n_x_ = sizes.front();
  n_u_ = sizes.back();
  if (lb.size() != n_u_ || ub.size() != n_u_) {
    throw DimensionMismatch("control bounds do not match the output layer");
  }
  for (Eigen::Index i = 0; i < lb.size(); ++i) {
    if (!(lb[i] < ub[i])) {
      throw ConfigError("control bounds require lb < ub componentwise");
    }
  }
  lb_ = std::move(lb);
  ub_ = std::move(ub);
  layers_.resize(sizes.size() - 1);
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    layers_[i].W = Matrix::Zero(sizes[i + 1], sizes[i]);
    layers_[i].b = Vector::Zero(sizes[i + 1]);
    layers_[i].act = (i + 2 == sizes.size()) ? Activation::ScaledSigmoid
                                             : Activation::Tanh;
  }
}

PolicyNetwork PolicyNetwork::glorot(const std::vector<int>& sizes,
                                    const Vector& lb, const Vector& ub,
                                    std::uint64_t seed) {
  PolicyNetwork net(sizes, lb, ub);
  net.seed_ = seed;
  Rng rng(seed);
  for (auto& layer : net.layers_) {
    const double gain = (layer.act == Activation::Tanh) ? 5.0 / 3.0 : 1.0;
    const double bound =
        gain * std::sqrt(6.0 / static_cast<double>(layer.W.rows() + layer.W.cols()));
    // Row-major fill to match the flattened parameter ordering.
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
        layer.W(r, c) = rng.uniform(-bound, bound);
      }
    }
    // Biases stay zero.
  }
  return net;
}

Eigen::Index PolicyNetwork::param_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers_) n += l.W.size() + l.b.size();
  return n;
}

std::vector<int> PolicyNetwork::layer_sizes() const {
  std::vector<int> sizes;
  sizes.push_back(n_x_);
  for (const auto& l : layers_) sizes.push_back(static_cast<int>(l.W.rows()));
  return sizes;
}

void PolicyNetwork::check_input(const Vector& x, const Vector* w) const {
  if (x.size() != n_x_) {
    throw DimensionMismatch("policy input has dimension " +
                            std::to_string(x.size()) + ", expected " +
                            std::to_string(n_x_));
  }
  if (w && w->size() != n_u_) {
    throw DimensionMismatch("covector has dimension " +
                            std::to_string(w->size()) + ", expected " +
                            std::to_string(n_u_));
  }
}

Vector PolicyNetwork::forward(const Vector& x) const {
  check_input(x, nullptr);
  Vector a = x;
  for (const auto& layer : layers_) {
    Vector z = layer.W * a + layer.b;
    if (layer.act == Activation::Tanh) {
      a = z.array().tanh().matrix();
    } else {
      a.resize(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        a[i] = lb_[i] + (ub_[i] - lb_[i]) * sigmoid(z[i]);
      }
    }
  }
  return a;
}

void PolicyNetwork::vjp(const Vector& x, const Vector& w, Vector& grad_x,
                        Vector& grad_params) const {
  check_input(x, &w);
  const std::size_t L = layers_.size();

  // Forward sweep, caching inputs and post-activations per layer.
  std::vector<Vector> inputs(L);   // a_{i-1}, the input to layer i
  std::vector<Vector> activ(L);    // activation output of layer i
  Vector a = x;
  for (std::size_t i = 0; i < L; ++i) {
    inputs[i] = a;
    Vector z = layers_[i].W * a + layers_[i].b;
    if (layers_[i].act == Activation::Tanh) {
      a = z.array().tanh().matrix();
    } else {
      a.resize(z.size());
      for (Eigen::Index k = 0; k < z.size(); ++k) a[k] = sigmoid(z[k]);
    }
    activ[i] = a;
  }

  grad_params.resize(param_count());

  // Backward sweep. dz holds w^T d(output)/d(z_i) as a column vector.
  Vector dz(n_u_);
  {
    const Vector& s = activ[L - 1];  // sigmoid values of the output layer
    for (Eigen::Index k = 0; k < n_u_; ++k) {
      dz[k] = w[k] * (ub_[k] - lb_[k]) * s[k] * (1.0 - s[k]);
    }
  }
  Eigen::Index offset = grad_params.size();
  for (std::size_t i = L; i-- > 0;) {
    const auto& layer = layers_[i];
    // Parameter block of layer i: weights row-major, then bias.
    offset -= layer.W.size() + layer.b.size();
    Eigen::Index pos = offset;
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
        grad_params[pos++] = dz[r] * inputs[i][c];
      }
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) {
      grad_params[pos++] = dz[r];
    }

    Vector da = layer.W.transpose() * dz;
    if (i == 0) {
      grad_x = std::move(da);
      break;
    }
    // inputs[i] is tanh(z_{i-1}); tanh' = 1 - tanh^2.
    const Vector& h = activ[i - 1];
    dz = (da.array() * (1.0 - h.array().square())).matrix();
  }
}

Vector PolicyNetwork::vjp_input(const Vector& x, const Vector& w) const {
  Vector gx, gp;
  vjp(x, w, gx, gp);
  return gx;
}

Vector PolicyNetwork::vjp_params(const Vector& x, const Vector& w) const {
  Vector gx, gp;
  vjp(x, w, gx, gp);
  return gp;
}

Vector PolicyNetwork::params() const {
  Vector flat(param_count());
  Eigen::Index pos = 0;
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
        flat[pos++] = layer.W(r, c);
      }
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) flat[pos++] = layer.b[r];
  }
  return flat;
}

void PolicyNetwork::set_params(const Vector& flat) {
  if (flat.size() != param_count()) {
    throw DimensionMismatch("parameter vector has dimension " +
                            std::to_string(flat.size()) + ", expected " +
                            std::to_string(param_count()));
  }
  Eigen::Index pos = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
        layer.W(r, c) = flat[pos++];
      }
    }
    for (Eigen::Index r = 0; r < layer.b.size(); ++r) layer.b[r] = flat[pos++];
  }
}

nlohmann::json PolicyNetwork::to_json() const {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["layer_sizes"] = layer_sizes();
  std::vector<std::string> acts;
  for (const auto& l : layers_) acts.emplace_back(activation_name(l.act));
  j["activations"] = acts;
  j["lb"] = std::vector<double>(lb_.begin(), lb_.end());
  j["ub"] = std::vector<double>(ub_.begin(), ub_.end());
  j["seed"] = seed_;
  const Vector flat = params();
  j["params"] = std::vector<double>(flat.begin(), flat.end());
  return j;
}

PolicyNetwork PolicyNetwork::from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format") != kCheckpointFormat) {
    throw ConfigError("unsupported policy checkpoint format");
  }
  const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
  const auto lbv = j.at("lb").get<std::vector<double>>();
  const auto ubv = j.at("ub").get<std::vector<double>>();
  Vector lb = Eigen::Map<const Vector>(lbv.data(), static_cast<Eigen::Index>(lbv.size()));
  Vector ub = Eigen::Map<const Vector>(ubv.data(), static_cast<Eigen::Index>(ubv.size()));
  PolicyNetwork net(sizes, std::move(lb), std::move(ub));
  net.seed_ = j.value("seed", std::uint64_t{0});
  const auto acts = j.at("activations").get<std::vector<std::string>>();
  if (acts.size() != net.layers_.size()) {
    throw ConfigError("checkpoint activation list does not match layer count");
  }
  for (std::size_t i = 0; i < acts.size(); ++i) {
    if (activation_from_name(acts[i]) != net.layers_[i].act) {
      throw ConfigError("checkpoint activation layout is not tanh.../scaled_sigmoid");
    }
  }
  const auto pv = j.at("params").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(pv.size()) != net.param_count()) {
    throw DimensionMismatch("checkpoint parameter count mismatch");
  }
  net.set_params(Eigen::Map<const Vector>(pv.data(), static_cast<Eigen::Index>(pv.size())));
  return net;
}

void PolicyNetwork::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot open checkpoint file for writing: " + path);
  out << to_json().dump(2) << "\n";
}

PolicyNetwork PolicyNetwork::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed checkpoint JSON in " + path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace ctrlode
