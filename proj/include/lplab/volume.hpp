#pragma once

// Weighted-volume integrals over the reachable set and their monotonicity
// scans. The pushforward route integrates e^{-l} times the exponential-map
// density over initial velocities, restricted to data that stay minimizing
// and conjugate-free (inadmissible nodes contribute zero). The direct route
// integrates over the manifold itself with the great-circle reduction and is
// only available on the sphere. Both see the same measure: velocities carry
// the Lebesgue measure of g(p0,0)-orthonormal components.

#include "lplab/action.hpp"
#include "lplab/background.hpp"
#include "lplab/bvp.hpp"
#include "lplab/geodesic.hpp"

#include <string>
#include <vector>

namespace lplab {

// Drift coefficient of the corrected volume weight e^{-A0 tau}:
//   A0 = ((2p-1)_+ / (2(2-p)) + 1/(2(2-p)c)) * r_sup,  A0 = 0 at p = 1/2.
// c must lie in (0,1).
double a0_constant(const FlowParams& par, double c, double r_sup);

// Cap of the monotonicity window before the c-fraction is applied:
//   min((2(1-p))^{-1/(2p-1)}, window) for p > 1/2, the full window otherwise.
double tau0_constant(const FlowParams& par);

// Largest rescaled time the rescaled-volume monotonicity admits:
//   (1/(2(1-p)))^{1/(2p-1)} for p > 1/2, the continuous limit e at p = 1/2.
double rho_cap(double p);

// Coefficient of the reduced-distance growth bound on a compact model,
//   l_p(q,tau) <= C0 (tau^{2p} + e^{2 c2 tau}/tau^{2-2p}),
// from the a priori action window: C0 = (1-p) max(c2 n, diam_0^2)/(p+1).
double c0_constant(const BackgroundId& bg, const FlowParams& par);

// Growth constant of the Jacobian-density envelope
//   tau^{-(1-p)n} e^{-C1 tau} J_p <= (1-p)^{-n}:
//   C1 = ((2p-1)_+/(2(2-p)) + t0/(2(2-p)(t0 - tau_ref))) * r_sup
// on a finite window, with the t0 -> infinity limit on ancient models.
double c1_envelope_constant(const BackgroundId& bg, const FlowParams& par, double tau_ref);

struct PushforwardQuad {
  int order = 20;              // Gauss-Legendre nodes per panel and axis
  int max_panels = 64;         // radial extension limit
  bool force_tensor = false;   // skip the rotational-symmetry reduction
  bool minimality_filter = true;
  double tail_rel = 1e-8;      // required bound on the neglected mass share
  double match_tol = 1e-6;     // action agreement defining "still minimizing"
  int threads = 1;
  SolveOptions probe;  // settings of the lean minimality solves
  ShootOptions shoot;
  PushforwardQuad() { probe.lean_starts = 2; }
};

struct PushforwardResult {
  double value = 0.0;
  double radius = 0.0;         // truncation radius in orthonormal velocity norm
  double tail_fraction = 0.0;  // certified neglected share (0 when cut off exactly)
  int nodes = 0;
  int admissible = 0;
  int failed = 0;              // node evaluations that errored; counted inadmissible
  double envelope_violation = 0.0;  // worst positive defect of the J_p envelope
  bool radial = false;         // 1-D reduction was applicable
};

PushforwardResult reduced_volume_pushforward_full(const BackgroundId& bg, const FlowParams& par,
                                                  double tau, const PushforwardQuad& quad = {});
double reduced_volume_pushforward(const BackgroundId& bg, const FlowParams& par, double tau,
                                  const PushforwardQuad& quad = {});

// Manifold-side volume via the great-circle reduction; sphere only.
double reduced_volume_direct(const BackgroundId& bg, const FlowParams& par, double tau);

struct VolumeScan {
  std::vector<double> taus;
  std::vector<double> values;        // volume per grid time
  std::vector<double> weights;       // e^{-A0 tau} or e^{-W(tau_bar, rho)}
  std::vector<double> weighted;      // value * weight (0 on underflow)
  std::vector<double> log_weighted;  // log(value) - drift, the monotone quantity
  std::vector<bool> monotone_ok;
  double A0 = 0.0;
  double tau0 = 0.0;
  std::string method;  // "pushforward" or "direct"
  bool all_ok = true;
  double worst_slack = 0.0;  // largest log-space increase along the grid
};

// Corrected-volume scan: rows (tau, V, e^{-A0 tau} V); the weighted column
// must be nonincreasing and stay below (sqrt(pi)/(1-p))^n within slack.
// Valid for p in [1/2, 1) on grids inside (0, tau1) where tau1 = (1-c) tau0
// for p > 1/2 and the full window for p = 1/2.
VolumeScan monotonicity_scan(const BackgroundId& bg, const FlowParams& par,
                             const std::vector<double>& tau_grid, double c,
                             const PushforwardQuad& quad = {});

struct ZpCheck {
  std::vector<double> taus;
  std::vector<double> log_z;
  std::vector<double> dlog_z;  // grid differences; exact sign test for monotone data
  double max_violation = 0.0;
  bool ok = false;
};

// Pointwise integrand monotonicity at fixed velocity datum:
// log Z_p(v, tau) = -(1-p) n log tau - l_p - A0 tau + log J_p must be
// nonincreasing along the grid. The datum must stay minimizing and
// conjugate-free through the last grid time.
ZpCheck zp_monotone_check(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                          const std::vector<double>& tau_grid, double c = 0.5,
                          const SolveOptions& probe = {});

// Volume of the parabolically rescaled flow at rescaled time rho, computed
// both through the rescaled background and through the scaling identity on
// the original flow; the two must agree to 1e-6 relative.
double rescaled_volume(const BackgroundId& bg, const FlowParams& par, double tau_bar, double rho,
                       bool enforce_rho_cap = false, const PushforwardQuad& quad = {});

// Scan of e^{-W(tau_bar, rho)} V_p^{tau_bar}(rho) over a tau_bar grid on the
// sphere. The comparison runs in log space: W grows fast enough that the
// weights themselves can underflow while the monotone quantity stays finite.
VolumeScan rescaled_monotonicity_scan(const BackgroundId& bg, const FlowParams& par, double rho,
                                      const std::vector<double>& tau_bar_grid, double tau_bar0,
                                      double c2, double C0);

}  // namespace lplab
