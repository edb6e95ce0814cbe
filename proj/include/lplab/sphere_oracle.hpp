#pragma once

// Symmetry-reduced weighted geodesics on the shrinking round sphere.
//
// Rotational symmetry collapses the problem to the polar angle theta(tau)
// along a great circle through the basepoint. The angular momentum
// k = tau^p c(tau) theta'(tau) is conserved by the reduced equation, so
//
//   theta(tau) = k I(tau),   I(tau) = int_0^tau rho^{-p}/c(rho) drho,
//   L(theta_q, taubar) = int_0^taubar rho^p R(rho) drho + theta_q^2 / I(taubar),
//
// with c(tau) = 2(n-1)(tau+a) and R = n/(2(tau+a)). This unit is deliberately
// independent of the shooting stack: it never touches the chart ODE, so it
// can arbitrate it. The first conjugate angle along a great circle is pi.

#include "lplab/background.hpp"

namespace lplab {

class SphereOracle {
 public:
  SphereOracle(const BackgroundId& bg, double p);

  int n() const { return n_; }
  double a() const { return a_; }
  double p() const { return p_; }

  double c_of(double tau) const { return 2.0 * (n_ - 1) * (tau + a_); }
  double scalar_R(double tau) const { return n_ / (2.0 * (tau + a_)); }

  // I(tau) and the curvature term, both via the s-substitution
  double momentum_integral(double tau) const;
  double curvature_term(double tau) const;

  double theta_of(double k, double tau) const { return k * momentum_integral(tau); }

  // action and reduced action of the minimizing branch to angle theta in [0, pi]
  double action(double theta, double tau_bar) const;
  double reduced_action(double theta, double tau_bar) const;

  // |v|_{g(0)} and chart |v| that reach the angle theta at tau_bar
  double v_norm_for(double theta, double tau_bar) const;
  double v_chart_for(double theta, double tau_bar) const;
  // angular momentum of a shot with chart datum magnitude |v|
  double k_of_v_chart(double v_chart) const { return c_of(0.0) * v_chart; }

  // chart |v| whose arc first conjugates exactly at tau_bar (theta = pi)
  double conjugate_v_chart(double tau_bar) const;

  // int_M e^{-l_scale * l(theta,tau)} dV_{g(tau)}; l_scale rescales the
  // exponent (parabolic-rescaling identities need values other than 1)
  double volume_integral(double tau, double l_scale = 1.0, double rel_tol = 1e-10) const;

  // integral of tau^{-weight_expo} e^{-l(theta,tau)} over the sphere at time tau
  double volume_direct(double tau, double weight_expo, double rel_tol = 1e-10) const;

 private:
  int n_;
  double a_;
  double p_;
};

}  // namespace lplab
