#pragma once

// Weighted action values and identity checks along curves. All integrals are
// evaluated in the regular parameter s = tau^{1-p}:
//
//   int_0^taubar rho^w F drho  =  1/(1-p) int_0^sbar s^{(w+p)/(1-p)} F ds,
//
// per-step Gauss-Legendre on the dense output, which keeps the weak
// tau-power endpoint behavior away from the quadrature nodes.

#include "lplab/background.hpp"
#include "lplab/geodesic.hpp"

#include <functional>

namespace lplab {

struct ActionValue {
  double L_p = 0.0;             // curvature_part + kinetic_part
  double l_p = 0.0;             // (1-p) L_p / taubar^{1-p}
  double curvature_part = 0.0;  // int rho^p R drho
  double kinetic_part = 0.0;    // int rho^p |gamma'|^2 drho = (1-p) int |x'|^2_g ds
};

ActionValue lp_length(const GeodesicCurve& curve);
// same value over the initial arc [0, tau_hi]
ActionValue lp_length_partial(const GeodesicCurve& curve, double tau_hi);

// int_0^tau_hi rho^w R(gamma(rho), rho) drho along the curve
double curve_integral_R(const GeodesicCurve& curve, double w, double tau_hi);

// Same with the Harnack-type expression
//   H(X) = -dR/dtau - R/tau - 2 <X, grad R> + 2 Ric(X, X),
// X = d gamma/d tau = (1-p) s^{-p/(1-p)} x'(s).
double curve_integral_H(const GeodesicCurve& curve, double w, double tau_hi);

// pointwise H(X) from a jet; tau must be positive
double harnack_H(const MetricJet& jet, const VecN& x_vel_tau, double tau);

enum class VariationMode { formula, fd };

// First variation of the action under the field Y (given with its s-derivative).
// formula: endpoint term 2(1-p) <x'(sbar), Y(sbar)>_g plus the Euler-Lagrange
//   integral; on solver geodesics the integrand is evaluated through the field
//   equation and the integral vanishes to roundoff, leaving the endpoint term.
// fd: centered difference of the action of the chart-perturbed curve
//   x(s) + eps Y(s). Requires a curve that never rotated charts.
double first_variation(const GeodesicCurve& curve, const std::function<VecN(double)>& y,
                       const std::function<VecN(double)>& dy, VariationMode mode,
                       double fd_eps = 1e-4);

// A priori action window from the model's curvature constants:
//   lower: -(c1 n/(p+1)) taubar^{p+1} + (1-p) e^{-2 c1 taubar} d0(p0,q)^2 / taubar^{1-p}
//   upper:  (c2 n/(p+1)) taubar^{p+1} + e^{2 c2 taubar} d0(p0,q)^2 / ((p+1) taubar^{1-p})
struct LpBoundsValue {
  double lower = 0.0;
  double upper = 0.0;
  double d0 = 0.0;
};
LpBoundsValue lp_bounds(const BackgroundId& bg, const FlowParams& par, const VecN& q, double tau_bar);

// Violation (positive part of lhs - rhs) of the Jacobian growth inequality
//   d/dtau log J_p <= (1-p) n/tau
//                   + (2p-1)/(2 tau^{2-p}) int_0^tau rho^{1-p} R drho
//                   - 1/(2 tau^{2-p}) int_0^tau rho^{2-p} H(X) drho
// at (v, tau), with the left side from centered differences of one Jacobian
// bundle. Returns lhs, rhs and the violation.
struct DlogJCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double violation = 0.0;
};
DlogJCheck dlogj_inequality_check(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                                  double tau, JacobianMode mode = JacobianMode::fd_bundle,
                                  double fd_dtau_rel = 1e-4);

}  // namespace lplab
