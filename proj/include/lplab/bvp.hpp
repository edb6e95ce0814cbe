#pragma once

// Two-point solver for the weighted action: find the initial datum v whose
// shot curve reaches q at tau_bar, by damped least squares on the chart
// endpoint residual with a multi-start sweep over a certified velocity ball.
// Scalar fields derived from the solver (action gradient and Laplacian
// checks, the G_p scan, the reduced-action minimum bound and the p = 1/2
// evolution residual) live here too.

#include "lplab/action.hpp"
#include "lplab/background.hpp"
#include "lplab/geodesic.hpp"

#include <functional>
#include <vector>

namespace lplab {

struct SolveOptions {
  int starts = 32;            // Halton starts in the velocity ball
  unsigned seed = 0;          // offsets the Halton sequence
  double cluster_tol = 1e-6;  // roots closer than this (relative) merge
  double tie_tol = 1e-8;      // action tie below which a minimizer is not unique
  double residual_tol = 1e-9; // endpoint chart residual target (relative)
  int max_iterations = 80;
  bool windings = true;       // sphere: add the +-1 great-circle wrap starts
  bool lean = false;          // probe mode: hint + a few starts, no conjugate scan
  bool has_hint = false;
  VecN hint;                  // warm start (chart-0 components)
  int lean_starts = 6;
  ShootOptions shoot;
};

struct ReducedSolution {
  VecN q;                 // target, primary-chart coordinates
  double tau_bar = 0.0;
  VecN v_star;            // minimizing datum, primary-chart components
  ActionValue value;
  int basin_count = 0;    // distinct converged roots
  bool conjugate_free = false;
  bool in_omega = false;  // unique minimizer and conjugate-free
  double residual = 0.0;  // endpoint chart defect of the accepted root
  double basin_separation = 0.0;  // action gap from the minimizer to the next cluster
  GeodesicCurve curve;
};

ReducedSolution solve_lp(const BackgroundId& bg, const FlowParams& par, const VecN& q,
                         double tau_bar, const SolveOptions& opt = {});

// Radius of the start/search ball in g(p0,0)-orthonormal velocity components,
// derived from the action upper bound and the model speed envelope.
double velocity_ball_radius(const BackgroundId& bg, const FlowParams& par, const VecN& q,
                            double tau_bar);

// Endpoint-velocity identity for the action gradient: the chart differential
// of L_p(., tau_bar) against 2 tau_bar^p g gamma'(tau_bar), both as covectors,
// error in the inverse-metric norm relative to the formula value.
struct GradCheck {
  VecN formula;  // covector components
  VecN fd;
  double rel_error = 0.0;
};
GradCheck grad_L_check(const BackgroundId& bg, const FlowParams& par, const ReducedSolution& sol,
                       double fd_step = 0.02);

// Laplacian comparison at a solved point:
//   lhs = metric Laplacian of L_p(., tau_bar) by second differences,
//   rhs = -2 tau^p R + n/(2p tau^{1-p})
//         + (2p-1)/tau int_0^tau rho^p R drho - 1/tau int_0^tau rho^{p+1} H drho.
struct LaplacianCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double violation = 0.0;  // positive part of lhs - rhs
};
LaplacianCheck laplacian_L_check(const BackgroundId& bg, const FlowParams& par,
                                 const ReducedSolution& sol, double fd_step = 0.02);

// G_p(tau) = min over the supplied chart points of tau^{1-p} L_p(q,tau) - (n/2p) tau.
struct GpRow {
  double tau = 0.0;
  double g_p = 0.0;
  VecN argmin;
};
std::vector<GpRow> g_p_scan(const BackgroundId& bg, const FlowParams& par,
                            const std::vector<double>& taus, const std::vector<VecN>& grid_q,
                            const SolveOptions& opt = {});

struct MinLpCheck {
  double min_lp = 0.0;
  double bound = 0.0;  // n(1-p) / (2p tau^{1-2p})
  bool ok = false;
  VecN argmin;
};
MinLpCheck min_lp_bound_check(const BackgroundId& bg, const FlowParams& par, double tau,
                              const std::vector<VecN>& grid_q, const SolveOptions& opt = {});

// Pointwise defect of the p = 1/2 reduced-distance evolution identity
//   l_tau - Lap l + |grad l|^2 - R + n/(2 tau) = 0
// for a supplied scalar field l(x, tau), second-order differences on a
// uniform grid of span [center - half_width, center + half_width]^n with m
// points per axis. Flat background with p = 1/2 only.
double lp_pde_residual(const BackgroundId& bg, const FlowParams& par,
                       const std::function<double(const VecN&, double)>& l_field,
                       const VecN& center, double half_width, int m, double tau);

}  // namespace lplab
