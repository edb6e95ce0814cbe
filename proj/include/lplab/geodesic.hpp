#pragma once

// Weighted geodesics of the backward flow in the regularized parameter
// s = tau^{1-p}. The curve ODE integrated here is
//
//   x'' = -Gamma(x,tau)(x',x')
//         + s^{2p/(1-p)}/(2(1-p)^2) grad R
//         - (2/(1-p)) s^{p/(1-p)} Ric(x',.)^sharp,        tau = s^{1/(1-p)},
//
// which is regular at s = 0 with initial slope x'(0) = v/(1-p); v is the
// limit of tau^p (d gamma/d tau) and is the datum every caller works with.
//
// On the sphere a curve may wander past the chart's antipodal singularity;
// the integrator then recenters the chart (a rotation of the frame) and the
// stored curve carries one chart index per step.

#include "lplab/background.hpp"
#include "lplab/linalg.hpp"
#include "lplab/ode.hpp"

#include <vector>

namespace lplab {

struct ShootOptions {
  double rtol = 1e-9;
  double atol = 1e-9;
  double max_step_frac = 1.0 / 64.0;  // cap on h relative to the s-range
  double envelope_factor = 1e3;       // blow-up guard multiplier on the speed envelope
  int max_rotations = 8;
  bool allow_rotation = true;
};

struct CurveStep {
  OdeStep ode;
  int chart = 0;
};

struct CurveState {
  int chart = 0;
  VecN x;
  VecN u;   // dx/ds
  VecN du;  // d2x/ds2 from the dense output
};

class GeodesicCurve {
 public:
  BackgroundId bg;
  FlowParams par;
  VecN v;             // tau^p gamma' datum, chart-0 components
  double tau_bar = 0.0;
  double s_bar = 0.0;
  std::vector<CurveStep> steps;
  std::vector<MatE> charts;  // sphere frames (charts[0] is primary); empty otherwise
  int rotations = 0;
  bool has_accel = true;  // false for hand-assembled node curves

  int n() const { return bg.n; }
  double p() const { return par.p; }
  double s_of_tau(double tau) const;
  double tau_of_s(double s) const;

  VecN v0() const { return v / (1.0 - par.p); }  // x'(0) in chart 0

  CurveState state_at(double s) const;
  // state transferred into the given chart index (sphere transfers go through
  // the ambient embedding; on flat/cigar the chart index is always 0)
  CurveState state_at_in_chart(double s, int chart) const;

  // endpoint in primary-chart coordinates (throws within the numerical guard
  // of the primary chart's antipode)
  VecN endpoint_primary() const;

  const MatE& frame(int chart) const;

  std::vector<double> node_s() const;
  std::vector<CurveState> node_states() const;
};

GeodesicCurve shoot(const BackgroundId& bg, const FlowParams& par, const VecN& v, double tau_bar,
                    const ShootOptions& opt = {});

// Hand-assembled curve from node data (uniform or not); used to feed residual
// checks with non-geodesic candidates. Velocities are d/ds values.
GeodesicCurve curve_from_nodes(const BackgroundId& bg, const FlowParams& par,
                               const std::vector<double>& s_nodes, const std::vector<VecN>& xs,
                               const std::vector<VecN>& us);

// Endpoint of the weighted exponential map in primary-chart coordinates.
VecN lp_exp(const BackgroundId& bg, const FlowParams& par, const VecN& v, double tau_bar,
            const ShootOptions& opt = {});

// Sup over nodes of the curve-equation defect |x'' - rhs|_{g(tau)}. Solver
// curves re-evaluate the cached accelerations; node-assembled curves fall
// back to centered differences of the node velocities.
double el_residual(const GeodesicCurve& curve);

enum class JacobianMode { fd_bundle, variational };

struct JacobianOptions {
  double fd_step = 1e-5;     // scaled by max(1, |v|)
  int dense_per_step = 4;    // det samples per base step for conjugate scanning
  double det_floor = 1e-10;  // |det| < floor * running max counts as conjugate
  bool scan = true;          // false skips the conjugate sweep (endpoint matrix only)
  ShootOptions shoot;
};

struct JacobianRecord {
  double tau = 0.0;
  MatN matrix;  // d(endpoint chart coords)/dv in the endpoint's chart
  double jp = 0.0;  // invariant Jacobian density; signed, negative past an odd crossing
  std::vector<double> conjugate_times;  // tau of det zero-crossings in (0, tau)
};

JacobianRecord exp_jacobian(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                            double tau_bar, JacobianMode mode, const JacobianOptions& opt = {});

// One shared bundle evaluated on a whole tau grid (ascending); far cheaper
// than repeated exp_jacobian calls and guarantees a consistent det sign
// history across the grid.
std::vector<JacobianRecord> exp_jacobian_grid(const BackgroundId& bg, const FlowParams& par,
                                              const VecN& v, const std::vector<double>& taus,
                                              JacobianMode mode, const JacobianOptions& opt = {});

// Co-integrated linearization (curvature-coupled variation equations). Only
// models carrying riemann + hess_R with parallel Ric support it (flat,
// sphere); chart rotation is not supported mid-curve in this mode.
struct VariationalBundle {
  GeodesicCurve base;               // joint system curve: state [x u Y Z]
  int dim = 0;                      // spatial dimension n
  MatN y_at(double s) const;        // columns Y_c(s)
  MatN z_at(double s) const;        // columns (nabla_s Y)_c(s)
};

VariationalBundle variational_bundle(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                                     double tau_bar, const ShootOptions& opt = {});

// Defect of the variation equation for one column, re-evaluated at the
// solver's own nodes (cached acceleration against the jet right-hand side).
double jacobi_residual(const VariationalBundle& vb, int column);

// Defect of the variation equation for a supplied field given at the curve's
// nodes, via centered differences (exact for affine fields on flat space).
double jacobi_residual(const GeodesicCurve& curve, const std::vector<VecN>& y_nodes);

}  // namespace lplab
