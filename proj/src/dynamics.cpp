// Copyright 2026 The ctrlode authors
// SPDX-License-Identifier: Apache-2.0

#include "ctrlode/dynamics.hpp"

#include <cassert>
#include <cmath>

namespace ctrlode {

VectorField closed_loop_rhs(const ControlProblem& prob,
                            const PolicyNetwork& net) {
  if (net.input_dim() != prob.n_x || net.output_dim() != prob.n_u) {
    throw DimensionMismatch("policy dimensions do not match the problem (" +
                            std::to_string(net.input_dim()) + "->" +
                            std::to_string(net.output_dim()) + " vs " +
                            std::to_string(prob.n_x) + "->" +
                            std::to_string(prob.n_u) + ")");
  }
  return [&prob, &net](double t, const Vector& x, Vector& dx) {
    const Vector u = net.forward(x);
#ifndef NDEBUG
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      assert(u[i] >= prob.u_lb[i] && u[i] <= prob.u_ub[i]);
    }
#endif
    prob.f(x, u, t, dx);
  };
}

Matrix jac_x(const ControlProblem& prob, const Vector& x, const Vector& u,
             double t) {
  return prob.f_x(x, u, t);
}

Matrix jac_u(const ControlProblem& prob, const Vector& x, const Vector& u,
             double t) {
  return prob.f_u(x, u, t);
}

void cost_partials(const ControlProblem& prob, const Vector& x,
                   const Vector& u, double t, Vector& lx, Vector& lu) {
  prob.l_grad(x, u, t, lx, lu);
}

ControlProblem make_vdp() {
  ControlProblem p;
  p.name = "vdp";
  p.n_x = 2;
  p.n_u = 1;
  p.x0 = (Vector(2) << 0.0, 1.0).finished();
  p.t0 = 0.0;
  p.tf = 5.0;
  p.u_lb = (Vector(1) << -0.3).finished();
  p.u_ub = (Vector(1) << 1.0).finished();

  p.f = [](const Vector& x, const Vector& u, double, Vector& dx) {
    dx.resize(2);
    dx[0] = x[0] * (1.0 - x[1] * x[1]) - x[1] + u[0];
    dx[1] = x[0];
  };
  p.f_x = [](const Vector& x, const Vector&, double) {
    Matrix A(2, 2);
    A(0, 0) = 1.0 - x[1] * x[1];
    A(0, 1) = -2.0 * x[0] * x[1] - 1.0;
    A(1, 0) = 1.0;
    A(1, 1) = 0.0;
    return A;
  };
  p.f_u = [](const Vector&, const Vector&, double) {
    Matrix B(2, 1);
    B(0, 0) = 1.0;
    B(1, 0) = 0.0;
    return B;
  };

  p.l = [](const Vector& x, const Vector& u, double) {
    return x[0] * x[0] + x[1] * x[1] + u[0] * u[0];
  };
  p.l_grad = [](const Vector& x, const Vector& u, double, Vector& lx,
                Vector& lu) {
    lx.resize(2);
    lx[0] = 2.0 * x[0];
    lx[1] = 2.0 * x[1];
    lu.resize(1);
    lu[0] = 2.0 * u[0];
  };

  p.phi = [](const Vector&) { return 0.0; };
  p.phi_x = [](const Vector&) { return Vector::Zero(2); };

  PathConstraint c;
  c.label = "x1_floor";
  c.h = [](const Vector& x, const Vector&) { return x[0] + 0.4; };
  c.h_x = [](const Vector&, const Vector&) {
    return (Vector(2) << 1.0, 0.0).finished();
  };
  c.h_u = [](const Vector&, const Vector&) { return Vector::Zero(1); };
  c.scale = 1.0;
  p.constraints.push_back(std::move(c));

  p.recommended_atol = 1e-8;
  return p;
}

ControlProblem make_bioreactor(const BioreactorParams& prm, double tf) {
  if (!(tf > 0.0)) throw ConfigError("bioreactor batch time must be positive");
  ControlProblem p;
  p.name = "bioreactor";
  p.n_x = 3;
  p.n_u = 2;
  p.x0 = (Vector(3) << 1.0, 150.0, 0.0).finished();
  p.t0 = 0.0;
  p.tf = tf;
  p.u_lb = (Vector(2) << 120.0, 0.0).finished();
  p.u_ub = (Vector(2) << 400.0, 40.0).finished();

  // Light-limited specific rates and their derivatives in I.
  auto growth = [prm](double I) {
    return prm.u_m * I / (I + prm.k_s + I * I / prm.k_i);
  };
  auto growth_dI = [prm](double I) {
    const double den = I + prm.k_s + I * I / prm.k_i;
    return prm.u_m * (prm.k_s - I * I / prm.k_i) / (den * den);
  };
  auto prod = [prm](double I) {
    return prm.k_m * I / (I + prm.k_sq + I * I / prm.k_iq);
  };
  auto prod_dI = [prm](double I) {
    const double den = I + prm.k_sq + I * I / prm.k_iq;
    return prm.k_m * (prm.k_sq - I * I / prm.k_iq) / (den * den);
  };

  p.f = [prm, growth, prod](const Vector& x, const Vector& u, double,
                            Vector& dx) {
    const double cx = x[0], cn = x[1], cq = x[2];
    const double I = u[0], fn = u[1];
    const double mu = growth(I) * cn / (cn + prm.K_N);
    dx.resize(3);
    dx[0] = mu * cx - prm.u_d * cx;
    dx[1] = -prm.Y_NX * mu * cx + fn;
    dx[2] = prod(I) * cx - prm.k_d * cq / (cn + prm.K_Np);
  };
  p.f_x = [prm, growth, prod](const Vector& x, const Vector& u, double) {
    const double cx = x[0], cn = x[1], cq = x[2];
    const double I = u[0];
    const double r = growth(I);
    const double mm = cn / (cn + prm.K_N);
    const double mm_dn = prm.K_N / ((cn + prm.K_N) * (cn + prm.K_N));
    Matrix A = Matrix::Zero(3, 3);
    A(0, 0) = r * mm - prm.u_d;
    A(0, 1) = r * cx * mm_dn;
    A(1, 0) = -prm.Y_NX * r * mm;
    A(1, 1) = -prm.Y_NX * r * cx * mm_dn;
    A(2, 0) = prod(I);
    A(2, 1) = prm.k_d * cq / ((cn + prm.K_Np) * (cn + prm.K_Np));
    A(2, 2) = -prm.k_d / (cn + prm.K_Np);
    return A;
  };
  p.f_u = [prm, growth_dI, prod_dI](const Vector& x, const Vector& u, double) {
    const double cx = x[0], cn = x[1];
    const double I = u[0];
    const double mm = cn / (cn + prm.K_N);
    Matrix B = Matrix::Zero(3, 2);
    B(0, 0) = growth_dI(I) * cx * mm;
    B(1, 0) = -prm.Y_NX * growth_dI(I) * cx * mm;
    B(1, 1) = 1.0;
    B(2, 0) = prod_dI(I) * cx;
    return B;
  };

  // Pure terminal objective; maximization encoded as phi = -C_qc(t_f).
  p.l = [](const Vector&, const Vector&, double) { return 0.0; };
  p.l_grad = [](const Vector&, const Vector&, double, Vector& lx, Vector& lu) {
    lx = Vector::Zero(3);
    lu = Vector::Zero(2);
  };
  p.phi = [](const Vector& x) { return -x[2]; };
  p.phi_x = [](const Vector&) {
    return (Vector(3) << 0.0, 0.0, -1.0).finished();
  };

  {
    PathConstraint c;
    c.label = "nitrate_cap";
    c.h = [](const Vector& x, const Vector&) { return 800.0 - x[1]; };
    c.h_x = [](const Vector&, const Vector&) {
      return (Vector(3) << 0.0, -1.0, 0.0).finished();
    };
    c.h_u = [](const Vector&, const Vector&) { return Vector::Zero(2); };
    c.scale = 800.0;
    p.constraints.push_back(std::move(c));
  }
  {
    PathConstraint c;
    c.label = "product_ratio";
    c.h = [](const Vector& x, const Vector&) {
      return 0.3 - (0.011 * x[0] - x[2]);
    };
    c.h_x = [](const Vector&, const Vector&) {
      return (Vector(3) << -0.011, 0.0, 1.0).finished();
    };
    c.h_u = [](const Vector&, const Vector&) { return Vector::Zero(2); };
    c.scale = 1.0;
    p.constraints.push_back(std::move(c));
  }
  {
    TerminalConstraint c;
    c.label = "terminal_nitrate";
    c.h = [](const Vector& x) { return 150.0 - x[1]; };
    c.h_x = [](const Vector&) {
      return (Vector(3) << 0.0, -1.0, 0.0).finished();
    };
    c.scale = 150.0;
    p.terminal_constraints.push_back(std::move(c));
  }

  // States span 0..800, so a tight absolute tolerance just burns steps.
  p.recommended_atol = 1e-6;
  return p;
}

}  // namespace ctrlode
