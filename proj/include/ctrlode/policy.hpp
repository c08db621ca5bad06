// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ctrlode/odeint.hpp"

namespace ctrlode {

enum class Activation { Tanh, ScaledSigmoid };

/// Overflow-guarded logistic function.
double sigmoid(double z);

struct PolicyLayer {
  Matrix W;  ///< n_out x n_in
  Vector b;  ///< n_out
  Activation act = Activation::Tanh;
};

/// Dense state-feedback controller u = pi(x).
///
/// Hidden layers use tanh; the output layer maps through the logistic
/// sigmoid scaled onto the control box, u_i = lb_i + (ub_i - lb_i)*sigma(z_i),
/// so every parameter set yields controls inside [lb, ub].
///
/// Parameters flatten layer-major (weights row-major, then bias) into one
/// vector; the ordering is fixed so optimizer state stays meaningful.
/// Networks are immutable during evaluation and safe to share read-only.
class PolicyNetwork {
 public:
  PolicyNetwork() = default;

  /// Zero-parameter network with the given layer sizes (input..output).
  PolicyNetwork(const std::vector<int>& sizes, Vector lb, Vector ub);

  /// Glorot-uniform initialization: biases zero, weights of layer i uniform
  /// on [-b, b] with b = G*sqrt(6/(n_in+n_out)); gain G = 5/3 for tanh hidden
  /// layers and 1 for the sigmoid output layer.
  static PolicyNetwork glorot(const std::vector<int>& sizes, const Vector& lb,
                              const Vector& ub, std::uint64_t seed);

  int input_dim() const { return n_x_; }
  int output_dim() const { return n_u_; }
  Eigen::Index param_count() const;
  std::vector<int> layer_sizes() const;
  std::size_t layer_count() const { return layers_.size(); }
  const PolicyLayer& layer(std::size_t i) const { return layers_[i]; }
  const Vector& lower_bounds() const { return lb_; }
  const Vector& upper_bounds() const { return ub_; }
  std::uint64_t init_seed() const { return seed_; }

  /// Control for state x; always inside [lb, ub].
  Vector forward(const Vector& x) const;

  /// w^T * (d pi / d x) for a control-space covector w.
  Vector vjp_input(const Vector& x, const Vector& w) const;

  /// w^T * (d pi / d theta), flattened in parameter order.
  Vector vjp_params(const Vector& x, const Vector& w) const;

  /// Both VJPs from a single forward/backward sweep (the adjoint hot path).
  void vjp(const Vector& x, const Vector& w, Vector& grad_x,
           Vector& grad_params) const;

  Vector params() const;
  void set_params(const Vector& flat);

  nlohmann::json to_json() const;
  static PolicyNetwork from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static PolicyNetwork load(const std::string& path);

 private:
  void check_input(const Vector& x, const Vector* w) const;

  std::vector<PolicyLayer> layers_;
  Vector lb_, ub_;
  int n_x_ = 0, n_u_ = 0;
  std::uint64_t seed_ = 0;
};

/// Spec-level constructor name; bounds come with the control problem.
inline PolicyNetwork init_glorot(const std::vector<int>& sizes,
                                 const Vector& lb, const Vector& ub,
                                 std::uint64_t seed) {
  return PolicyNetwork::glorot(sizes, lb, ub, seed);
}

}  // namespace ctrlode
