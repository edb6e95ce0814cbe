#pragma once

// Closed-form backward Ricci-flow backgrounds g(tau) with dg/dtau = +2 Ric.
//
//   flat(n)      static Euclidean space, zero curvature
//   sphere(n,a)  shrinking round sphere, g(tau) = 2(n-1)(tau+a) g_round, ancient
//   cigar(t0)    Hamilton's cigar soliton on R^2, g_ij = delta_ij / (F + |x|^2)
//                with F(tau) = exp(4(t0 - tau))
//
// Every model is sampled through one chart convention:
//   flat/cigar: global Cartesian chart on R^n
//   sphere:     azimuthal-equidistant chart at a pole; |x| is the polar angle,
//               regular at 0, singular at pi (the atlas machinery in
//               geodesic.hpp rotates charts before that).
//
// A parabolic rescale g'(tau) = g(lambda tau)/lambda is carried either by the
// sphere's radius parameter (exact closed form) or by a generic scale factor
// on the jet.

#include "lplab/linalg.hpp"

#include <optional>
#include <string>

namespace lplab {

enum class BackgroundKind { flat, sphere, cigar };

struct BackgroundId {
  BackgroundKind kind = BackgroundKind::flat;
  int n = 2;
  double a = 1.0;     // sphere: c(tau) = 2(n-1)(tau+a), extinction at forward time a
  double t0 = 0.0;    // cigar: backward-time origin in F(tau) = exp(4(t0-tau))
  double scale = 1.0; // generic parabolic rescale factor (flat/cigar)

  std::string describe() const;
};

BackgroundId make_flat(int n);
BackgroundId make_sphere(int n, double a);
BackgroundId make_cigar(double t0);

// g'(tau) = g(lambda*tau)/lambda. Composes multiplicatively; on the sphere it
// folds into the radius parameter (a -> a/lambda) so the closed-form reduced
// problem stays available.
BackgroundId rescale(const BackgroundId& bg, double lambda);

// Pointwise data of g(tau) at chart point x. grad_R is the covector dR;
// raise with g_inv when a vector is needed. ric_dtau, riemann and hess_R are
// populated when the model has them in closed form (all three models do);
// consumers that require them must check and fail loudly.
struct MetricJet {
  int n = 0;
  double tau = 0.0;
  MatN g;
  MatN g_inv;
  Ten3 christoffel;
  MatN ric;
  double scalar_R = 0.0;
  VecN grad_R;
  double dR_dtau = 0.0;
  std::optional<MatN> ric_dtau;
  std::optional<Ten4> riemann;
  std::optional<MatN> hess_R;
};

// tau = 0 is a valid sample on all models here (the flows are defined through
// the spatial slice at the observation time).
MetricJet sample_jet(const BackgroundId& bg, const VecN& x, double tau);

// Max-abs residual over the self-consistency identities the jet must satisfy:
// centered differences of g against 2 Ric and of R against dR_dtau in time,
// of R against grad_R and of g against the Christoffel symbols in space, and
// of grad_R against hess_R when present. h is the FD step.
double flow_consistency_check(const BackgroundId& bg, const VecN& x, double tau, double h);

// Global curvature constants of the model (suprema over the manifold and the
// whole backward window):
//   Ric >= -c1 g, Ric <= c2 g, sup R = r_sup, sup(|R| + |grad R| + |Ric|) = k1_sup.
struct CurvatureBounds {
  double c1 = 0.0;
  double c2 = 0.0;
  double r_sup = 0.0;
  double k1_sup = 0.0;
};
CurvatureBounds curvature_bounds(const BackgroundId& bg);

// Riemannian distance in g(0). Sphere: sqrt(c(0)) times the central angle.
// Cigar: closed form from the tip, a small fixed-metric shooting solve between
// generic points. Flat: Euclidean scaled by the rescale factor.
double distance_g0(const BackgroundId& bg, const VecN& x, const VecN& y);

// Flow parameters shared by every operation downstream: the exponent p of the
// time weight, the backward-time origin t0 (positive values cap the usable
// window, nonpositive values mark an ancient flow), the largest usable tau,
// and the spatial basepoint in chart coordinates.
struct FlowParams {
  double p = 0.5;
  double t0 = 0.0;
  double tau_max = 1.0e6;
  VecN p0;
};

// Defaults t0 from the model (sphere -a, cigar t0, flat 0) and centers p0.
FlowParams make_flow_params(const BackgroundId& bg, double p, double tau_max = 1.0e6);

void validate(const FlowParams& par, const BackgroundId& bg);

// Largest tau the theory's monotonicity window may use: t0 when the flow dies
// at a finite forward time, otherwise the configured tau_max.
double window_cap(const FlowParams& par);

// --- sphere atlas -----------------------------------------------------------
//
// A chart frame is an orthogonal (n+1)x(n+1) matrix Q; row 0 is the pole and
// rows 1..n the tangent basis. Chart coords x map to the ambient unit sphere
// via y = Q^T (cos r, sin(r) x/r). The identity frame is the primary chart.

MatE identity_frame(int n);

VecE chart_to_ambient(const MatE& q, const VecN& x);
// Fails (throws) within tol of the antipode of q's pole, where the chart is
// singular.
VecN ambient_to_chart(const MatE& q, const VecE& y);

// Velocity pushforward/pullback along the same maps. The pullback is exact
// (no finite differencing) and loses conditioning like 1/h(r) near r = pi.
VecE chart_velocity_to_ambient(const MatE& q, const VecN& x, const VecN& xdot);
VecN ambient_velocity_to_chart(const MatE& q, const VecN& x, const VecE& ydot);

// New frame with its pole at chart point x of frame q (used when a curve
// approaches the chart's antipodal singularity). Deterministic completion.
MatE recenter_frame(const MatE& q, const VecN& x);

// Transfer a point known in chart `from` into chart `to`.
VecN chart_point_to(const MatE& from, const VecN& x, const MatE& to);
VecN chart_velocity_to(const MatE& from, const VecN& x, const VecN& xdot, const MatE& to);

// Central angle between two points of the primary chart (the chart radius IS
// the angle from the pole, so this is spherical trigonometry, not quadrature).
double sphere_angle(const VecN& x, const VecN& y);

}  // namespace lplab
