// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/adjoint.hpp"

#include <cmath>

namespace ctrlode {

namespace {

void check_dims(const ControlProblem& prob, const PolicyNetwork& net) {
  if (net.input_dim() != prob.n_x || net.output_dim() != prob.n_u) {
    throw DimensionMismatch("policy dimensions do not match the problem");
  }
}

// Shared backward-pass term assembly at one evaluation time.
//
//   w      = lambda^T f_u + l_u              (control covector)
//   H_x    = lambda^T f_x + l_x + w^T dpi/dx
//   H_th   = w^T dpi/dtheta
struct HamiltonianPartials {
  const ControlProblem& prob;
  const PolicyNetwork& net;
  const Trajectory& forward;
  Eigen::Index n_x;

  mutable Vector x_aug, x, u, lx, lu, w, gx, gth;

  void eval(double t, const Vector& lambda, Vector& h_x, Vector* h_theta) const {
    forward.eval_into(t, x_aug);
    x = x_aug.head(n_x);
    u = net.forward(x);
    const Matrix A = prob.f_x(x, u, t);
    const Matrix B = prob.f_u(x, u, t);
    prob.l_grad(x, u, t, lx, lu);
    w.noalias() = B.transpose() * lambda;
    w += lu;
    if (h_theta) {
      net.vjp(x, w, gx, *h_theta);
    } else {
      gx = net.vjp_input(x, w);
    }
    h_x.noalias() = A.transpose() * lambda;
    h_x += lx;
    h_x += gx;
  }
};

// Adaptive Simpson on a vector integrand with a componentwise mixed
// error test. Used only by the quadrature cross-check.
class SimpsonQuadrature {
 public:
  SimpsonQuadrature(std::function<Vector(double)> f, double atol, double rtol)
      : f_(std::move(f)), atol_(atol), rtol_(rtol) {}

  Vector integrate(double a, double b) {
    const Vector fa = f_(a);
    const Vector fb = f_(b);
    const double m = 0.5 * (a + b);
    const Vector fm = f_(m);
    Vector whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return recurse(a, b, fa, fm, fb, whole, kMaxDepth);
  }

 private:
  static constexpr int kMaxDepth = 28;

  Vector recurse(double a, double b, const Vector& fa, const Vector& fm,
                 const Vector& fb, const Vector& whole, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const Vector flm = f_(lm);
    const Vector frm = f_(rm);
    const Vector left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const Vector right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const Vector refined = left + right;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < refined.size(); ++i) {
      const double err = std::abs(refined[i] - whole[i]) / 15.0;
      const double tol = atol_ + rtol_ * std::abs(refined[i]);
      worst = std::max(worst, err / tol);
    }
    if (worst <= 1.0 || depth == 0) {
      return refined + (refined - whole) / 15.0;
    }
    return recurse(a, m, fa, flm, fm, left, depth - 1) +
           recurse(m, b, fm, frm, fb, right, depth - 1);
  }

  std::function<Vector(double)> f_;
  double atol_, rtol_;
};

}  // namespace

Simulation simulate(const ControlProblem& prob, const PolicyNetwork& net,
                    const IntegratorConfig& cfg) {
  check_dims(prob, net);
  const Eigen::Index n_x = prob.n_x;
  const bool split = static_cast<bool>(prob.l_diag);
  const Eigen::Index n_aug = n_x + 1 + (split ? 1 : 0);

  Vector x0 = Vector::Zero(n_aug);
  x0.head(n_x) = prob.x0;

  Vector u(prob.n_u), dx(n_x);
  VectorField rhs = [&](double t, const Vector& xa, Vector& out) {
    const auto x = xa.head(n_x);
    u = net.forward(x);
    prob.f(x, u, t, dx);
    out.resize(n_aug);
    out.head(n_x) = dx;
    out[n_x] = prob.l(x, u, t);
    if (split) out[n_x + 1] = prob.l_diag(x, u, t);
  };

  Simulation sim;
  sim.traj = integrate(rhs, x0, prob.t0, prob.tf, cfg);
  const Vector& xf_aug = sim.traj.states().back();
  const Vector xf = xf_aug.head(n_x);
  sim.running_cost = xf_aug[n_x];
  sim.terminal_cost = prob.phi(xf);
  sim.cost = sim.running_cost + sim.terminal_cost;
  if (split) {
    sim.objective = xf_aug[n_x + 1] +
                    (prob.phi_diag ? prob.phi_diag(xf) : sim.terminal_cost);
    sim.penalty = sim.cost - sim.objective;
  } else {
    sim.objective = sim.cost;
    sim.penalty = 0.0;
  }
  return sim;
}

GradientResult grad(const ControlProblem& prob, const PolicyNetwork& net,
                    const IntegratorConfig& cfg) {
  check_dims(prob, net);
  const Eigen::Index n_x = prob.n_x;
  const Eigen::Index n_th = net.param_count();

  Simulation sim = simulate(prob, net, cfg);
  const Vector xf = sim.traj.states().back().head(n_x);

  GradientResult res;
  res.cost = sim.cost;
  res.objective = sim.objective;
  res.penalty = sim.penalty;
  res.forward_stats = sim.traj.stats();

  // Backward extended system F = [lambda; J_theta], dF/dt = [-H_x; -H_theta],
  // integrated from t_f down to t0. lambda(t_f) = phi_x(x(t_f)) starts the
  // stationary-path condition; J_theta(t_f) = 0.
  HamiltonianPartials parts{prob, net, sim.traj, n_x};
  Vector F0 = Vector::Zero(n_x + n_th);
  F0.head(n_x) = prob.phi_x(xf);

  Vector h_x(n_x), h_th(n_th);
  VectorField rhs = [&](double t, const Vector& F, Vector& out) {
    const Vector lambda = F.head(n_x);
    parts.eval(t, lambda, h_x, &h_th);
    out.resize(n_x + n_th);
    out.head(n_x) = -h_x;
    out.tail(n_th) = -h_th;
  };

  Trajectory back;
  try {
    back = integrate(rhs, F0, prob.tf, prob.t0, cfg);
  } catch (const NonFiniteState&) {
    throw NonFiniteAdjoint(
        "adjoint diverged on the backward pass (loose tolerances or an "
        "exploding policy Jacobian)");
  }

  const Vector& F_t0 = back.states().back();
  res.grad = F_t0.tail(n_th);
  res.lambda0 = F_t0.head(n_x);
  res.adjoint_steps = back.stats().n_accepted;
  res.adjoint_stats = back.stats();
  res.forward = std::move(sim.traj);
  return res;
}

Vector grad_via_quadrature(const ControlProblem& prob,
                           const PolicyNetwork& net,
                           const IntegratorConfig& cfg) {
  check_dims(prob, net);
  const Eigen::Index n_x = prob.n_x;

  Simulation sim = simulate(prob, net, cfg);
  const Vector xf = sim.traj.states().back().head(n_x);

  // Backward pass over the adjoint alone.
  HamiltonianPartials parts{prob, net, sim.traj, n_x};
  Vector h_x(n_x);
  VectorField rhs = [&](double t, const Vector& lambda, Vector& out) {
    parts.eval(t, lambda, h_x, nullptr);
    out = -h_x;
  };
  Trajectory lam;
  try {
    lam = integrate(rhs, prob.phi_x(xf), prob.tf, prob.t0, cfg);
  } catch (const NonFiniteState&) {
    throw NonFiniteAdjoint("adjoint diverged on the backward pass");
  }

  // Quadrature of H_theta(t) over both interpolants.
  Vector x_aug, x, u, lx, lu, w, lambda;
  auto integrand = [&](double t) -> Vector {
    sim.traj.eval_into(t, x_aug);
    x = x_aug.head(n_x);
    lambda = lam.eval(t);
    u = net.forward(x);
    const Matrix B = prob.f_u(x, u, t);
    prob.l_grad(x, u, t, lx, lu);
    w.noalias() = B.transpose() * lambda;
    w += lu;
    return net.vjp_params(x, w);
  };
  SimpsonQuadrature quad(integrand, std::max(cfg.atol * 0.1, 1e-14),
                         cfg.rtol * 0.1);
  return quad.integrate(prob.t0, prob.tf);
}

}  // namespace ctrlode
