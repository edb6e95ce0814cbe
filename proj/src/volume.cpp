#include "lplab/volume.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lplab/quadrature.hpp"
#include "lplab/sphere_oracle.hpp"
#include "lplab/util.hpp"

namespace lplab {

namespace {

constexpr double kPi = 3.14159265358979323846;

double sphere_surface(int n) {
  switch (n) {
    case 1: return 2.0;
    case 2: return 2.0 * kPi;
    case 3: return 4.0 * kPi;
    default: throw std::invalid_argument("volume: dimension out of range");
  }
}

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// upper bound of int_R^inf r^{n-1} e^{-alpha r^2} dr for n in 1..3, R > 0
double gauss_tail(int n, double alpha, double R) {
  double e = std::exp(-alpha * R * R);
  switch (n) {
    case 1: return e / (2.0 * alpha * R);
    case 2: return e / (2.0 * alpha);
    case 3: return e * (R / (2.0 * alpha) + 1.0 / (4.0 * alpha * alpha * R));
    default: throw std::invalid_argument("gauss_tail: dimension out of range");
  }
}

}  // namespace

double a0_constant(const FlowParams& par, double c, double r_sup) {
  if (!(c > 0.0 && c < 1.0)) throw std::range_error("a0_constant: c must lie in (0,1)");
  const double p = par.p;
  if (p == 0.5) return 0.0;
  return (positive_part(2.0 * p - 1.0) / (2.0 * (2.0 - p)) + 1.0 / (2.0 * (2.0 - p) * c)) * r_sup;
}

double tau0_constant(const FlowParams& par) {
  const double window = window_cap(par);
  if (par.p <= 0.5) return window;
  return std::min(std::pow(2.0 * (1.0 - par.p), -1.0 / (2.0 * par.p - 1.0)), window);
}

double rho_cap(double p) {
  if (!(p >= 0.5 && p < 1.0)) throw std::invalid_argument("rho_cap: p must lie in [1/2, 1)");
  if (p == 0.5) return std::exp(1.0);
  return std::pow(1.0 / (2.0 * (1.0 - p)), 1.0 / (2.0 * p - 1.0));
}

double c0_constant(const BackgroundId& bg, const FlowParams& par) {
  if (bg.kind != BackgroundKind::sphere)
    throw std::invalid_argument("c0_constant: compact model required");
  const double p = par.p;
  const double c2 = curvature_bounds(bg).c2;
  const double c0_metric = 2.0 * (bg.n - 1) * bg.a;
  const double diam = kPi * std::sqrt(c0_metric);
  return (1.0 - p) * std::max(c2 * bg.n, diam * diam) / (1.0 + p);
}

double c1_envelope_constant(const BackgroundId& bg, const FlowParams& par, double tau_ref) {
  const double p = par.p;
  const double r_sup = curvature_bounds(bg).r_sup;
  const double lead = positive_part(2.0 * p - 1.0) / (2.0 * (2.0 - p));
  if (par.t0 > 0.0) {
    if (!(tau_ref < par.t0))
      throw std::invalid_argument("c1_envelope_constant: tau_ref must precede the window end");
    return (lead + par.t0 / (2.0 * (2.0 - p) * (par.t0 - tau_ref))) * r_sup;
  }
  return (lead + 1.0 / (2.0 * (2.0 - p))) * r_sup;
}

namespace {

struct NodeEval {
  double phi = 0.0;
  bool admissible = false;
  bool failed = false;
  double envelope = 0.0;  // positive defect of the density envelope
};

struct PushforwardCore {
  BackgroundId bg;
  FlowParams par;
  double tau = 0.0;
  double l_scale = 1.0;
  PushforwardQuad quad;

  MatN chart_of_orthonormal;  // inverse transpose Cholesky factor of g(p0,0)
  bool filter = true;
  bool check_envelope = false;
  double env_pref = 0.0;   // tau^{-(1-p)n} e^{-C1 tau}
  double env_limit = 0.0;  // (1-p)^{-n}

  double alpha = 0.0;   // certified lower decay rate of the exponent in |w|^2
  double offset = 0.0;  // additive slack of that lower bound
  bool has_j_env = false;
  double j_env = 0.0;  // density ceiling over admissible data
  std::optional<double> cap;  // orthonormal radius beyond which nodes cannot minimize

  // tallies of one integral evaluation
  mutable std::atomic<int> n_nodes{0};
  mutable std::atomic<int> n_admissible{0};
  mutable std::atomic<int> n_failed{0};
  mutable std::mutex env_mu;
  mutable double env_worst = 0.0;

  PushforwardCore(const BackgroundId& b, const FlowParams& fp, double t, double ls,
                  const PushforwardQuad& q)
      : bg(b), par(fp), tau(t), l_scale(ls), quad(q) {
    validate(par, bg);
    if (!(tau > 0.0) || tau > window_cap(par))
      throw std::invalid_argument("volume: tau outside the flow window");
    if (!(l_scale > 0.0)) throw std::invalid_argument("volume: exponent scale must be positive");
    MetricJet j0 = sample_jet(bg, par.p0, 0.0);
    Eigen::LLT<MatN> llt(j0.g);
    chart_of_orthonormal = MatN(llt.matrixL().transpose()).inverse();
    filter = quad.minimality_filter && bg.kind != BackgroundKind::flat;

    const double p = par.p;
    has_j_env = par.t0 <= 0.0 || tau < par.t0;
    if (has_j_env) {
      double c1 = c1_envelope_constant(bg, par, tau);
      env_pref = std::pow(tau, -(1.0 - p) * bg.n) * std::exp(-c1 * tau);
      env_limit = std::pow(1.0 - p, -bg.n);
      j_env = env_limit / env_pref;
    }
    check_envelope = has_j_env && l_scale == 1.0;

    const CurvatureBounds cb = curvature_bounds(bg);
    const double a1 = std::max(1.0 / ((1.0 - p) * (1.0 - p)), 2.0 / (1.0 - p));
    const double c2g = 2.0 * (1.0 - p) * a1 * cb.k1_sup;
    const double c3 = c2g / (8.0 * (1.0 + 2.0 * p));
    const double c3p = (1.0 - p) * (1.0 - p) * c3;
    alpha = (c2g * tau < 600.0) ? l_scale * std::exp(-c2g * tau) : 0.0;
    offset = l_scale * (c3p * (1.0 - p) / (2.0 + p) * std::pow(tau, 1.0 + 2.0 * p) +
                        (1.0 - p) * cb.r_sup * std::pow(tau, 2.0 * p) / (1.0 + p));

    if (bg.kind == BackgroundKind::sphere) {
      SphereOracle oracle(bg, p);
      double c0_metric = oracle.c_of(0.0);
      cap = (kPi / oracle.momentum_integral(tau)) / std::sqrt(c0_metric);
    }
  }

  NodeEval eval(const VecN& w) const {
    NodeEval out;
    n_nodes.fetch_add(1);
    VecN v = chart_of_orthonormal * w;
    try {
      GeodesicCurve curve = shoot(bg, par, v, tau, quad.shoot);
      JacobianOptions jopt;
      jopt.shoot = quad.shoot;
      JacobianRecord rec =
          exp_jacobian(bg, par, v, tau, JacobianMode::fd_bundle, jopt);
      if (!rec.conjugate_times.empty() || !(rec.jp > 0.0)) return out;
      ActionValue act = lp_length(curve);
      if (filter) {
        // a probe that cannot run (chart guard at the far sliver) keeps the
        // node: conjugate-free shooting data on this model catalog minimize
        try {
          VecN q = curve.endpoint_primary();
          SolveOptions lo = quad.probe;
          lo.lean = true;
          lo.has_hint = true;
          lo.hint = v;
          lo.shoot = quad.shoot;
          ReducedSolution sol = solve_lp(bg, par, q, tau, lo);
          if (sol.value.L_p < act.L_p - quad.match_tol * (1.0 + std::fabs(act.L_p))) return out;
        } catch (const std::domain_error&) {
        }
      }
      out.phi = std::exp(-l_scale * act.l_p) * rec.jp;
      out.admissible = true;
      n_admissible.fetch_add(1);
      if (check_envelope) {
        double defect = env_pref * rec.jp - env_limit;
        if (defect > 0.0) {
          std::lock_guard<std::mutex> lock(env_mu);
          env_worst = std::max(env_worst, defect);
        }
        out.envelope = positive_part(defect);
      }
    } catch (const std::exception&) {
      out = NodeEval{};
      out.failed = true;
      n_failed.fetch_add(1);
    }
    return out;
  }
};

struct RayScanResult {
  double integral = 0.0;       // of phi(r e) r^{n-1} over [0, r_end]
  double r_end = 0.0;
  double tail = 0.0;           // certified bound on the neglected remainder
  bool exact_cutoff = false;   // stopped at the admissibility cap
};

// Shared radial driver: integrates f(r) = phi(r e) r^{n-1} outward in panels
// of width delta until the running contribution share drops below the target
// or the limit radius is reached, then certifies the remainder by the decay
// of the last panel.
RayScanResult scan_ray(const PushforwardCore& core, const VecN& dir, double delta, double r_limit,
                       bool limit_is_cap) {
  const int n = core.bg.n;
  const int m = std::max(4, core.quad.order);
  const GlRule& rule = gl_rule(m);
  int i_in = 0, i_out = 0;  // indices of the innermost/outermost node
  for (int i = 1; i < m; ++i) {
    if (rule.nodes[i] < rule.nodes[i_in]) i_in = i;
    if (rule.nodes[i] > rule.nodes[i_out]) i_out = i;
  }
  RayScanResult out;
  double total = 0.0;
  double r_in = 0.0, r_out = 0.0, f_in = 0.0, f_out = 0.0;
  for (int k = 0; k < core.quad.max_panels; ++k) {
    double a = k * delta;
    if (a >= r_limit) break;
    double b = std::min(a + delta, r_limit);
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    std::vector<double> vals(m);
    parallel_for(m, core.quad.threads, [&](std::size_t i) {
      double r = mid + half * rule.nodes[i];
      NodeEval ev = core.eval(VecN(r * dir));
      vals[i] = rule.weights[i] * half * ev.phi * std::pow(r, n - 1);
    });
    double panel = pairwise_sum(vals);
    total += panel;
    r_in = mid + half * rule.nodes[i_in];
    r_out = mid + half * rule.nodes[i_out];
    f_in = vals[i_in] / (rule.weights[i_in] * half);
    f_out = vals[i_out] / (rule.weights[i_out] * half);
    out.r_end = b;
    if (b >= r_limit) {
      out.exact_cutoff = limit_is_cap;
      break;
    }
    if (k >= 1 && total > 0.0 && panel <= core.quad.tail_rel / 8.0 * total) break;
  }
  out.integral = total;
  if (out.exact_cutoff || total <= 0.0) {
    out.tail = 0.0;
    return out;
  }

  // remainder bound: the sharper of the a priori Gaussian envelope and the
  // decay fitted to the last panel; the admissible set only shrinks with the
  // radius on this catalog, so a vanished outer edge means a vanished tail
  double best = std::numeric_limits<double>::infinity();
  if (core.has_j_env && core.alpha > 0.0 && core.offset < 600.0)
    best = core.j_env * std::exp(core.offset) * gauss_tail(n, core.alpha, out.r_end);
  if (f_out <= 0.0) {
    best = 0.0;
  } else if (f_in > f_out && r_out > r_in) {
    double beta = std::log(f_in / f_out) / (r_out * r_out - r_in * r_in);
    best = std::min(best, f_out / (beta * out.r_end));
  }
  if (!std::isfinite(best)) {
    std::ostringstream os;
    os << "volume quadrature truncation: integrand not decaying at radius " << out.r_end
       << " (tail uncertifiable)";
    throw std::runtime_error(os.str());
  }
  if (best > core.quad.tail_rel * total) {
    std::ostringstream os;
    os << "volume quadrature truncation: certified tail " << best << " exceeds "
       << core.quad.tail_rel << " of mass " << total << " at radius " << out.r_end;
    throw std::runtime_error(os.str());
  }
  out.tail = best;
  return out;
}

bool isotropic_about_basepoint(const BackgroundId& bg, const FlowParams& par) {
  switch (bg.kind) {
    case BackgroundKind::flat: return true;
    case BackgroundKind::sphere: return par.p0.norm() == 0.0;
    case BackgroundKind::cigar: return par.p0.norm() == 0.0;
  }
  return false;
}

struct CoreResult {
  double raw = 0.0;  // integral of e^{-l_scale l} J over admissible data
  double radius = 0.0;
  double tail_fraction = 0.0;
  bool radial = false;
};

CoreResult pushforward_core(const PushforwardCore& core) {
  const int n = core.bg.n;
  const double delta = 3.0 / std::sqrt(core.l_scale);
  double r_gauss = std::numeric_limits<double>::infinity();
  if (core.alpha > 0.0)
    r_gauss =
        1.5 * std::sqrt((std::log(1.0 / core.quad.tail_rel) + n + core.offset) / core.alpha);
  bool limit_is_cap = false;
  double r_limit = r_gauss;
  if (core.cap && *core.cap <= r_gauss) {
    r_limit = *core.cap;
    limit_is_cap = true;
  }
  if (!std::isfinite(r_limit)) r_limit = core.quad.max_panels * delta;

  CoreResult out;
  if (!core.quad.force_tensor && isotropic_about_basepoint(core.bg, core.par)) {
    VecN dir = VecN::Zero(n);
    dir(0) = 1.0;
    RayScanResult ray = scan_ray(core, dir, delta, r_limit, limit_is_cap);
    out.raw = sphere_surface(n) * ray.integral;
    out.radius = ray.r_end;
    out.tail_fraction = ray.integral > 0.0 ? ray.tail / ray.integral : 0.0;
    out.radial = true;
    return out;
  }

  // anisotropic case: probe the decay radius along every axis ray, then run
  // one tensor rule over the covering ball
  double r_use = 0.0, tail_frac = 0.0;
  for (int axis = 0; axis < n; ++axis)
    for (int sgn : {1, -1}) {
      VecN dir = VecN::Zero(n);
      dir(axis) = sgn;
      RayScanResult ray = scan_ray(core, dir, delta, r_limit, limit_is_cap);
      r_use = std::max(r_use, ray.r_end);
      if (ray.integral > 0.0) tail_frac = std::max(tail_frac, ray.tail / ray.integral);
    }
  std::vector<double> breaks;
  for (double b = delta; b < r_use; b += delta) breaks.push_back(b);
  std::vector<BallNode> nodes = ball_rule(n, r_use, core.quad.order, breaks);
  std::vector<double> vals(nodes.size());
  parallel_for(nodes.size(), core.quad.threads, [&](std::size_t i) {
    VecN w(n);
    for (int d = 0; d < n; ++d) w(d) = nodes[i].x[d];
    vals[i] = nodes[i].weight * core.eval(w).phi;
  });
  out.raw = pairwise_sum(vals);
  out.radius = r_use;
  out.tail_fraction = tail_frac;
  out.radial = false;
  return out;
}

}  // namespace

PushforwardResult reduced_volume_pushforward_full(const BackgroundId& bg, const FlowParams& par,
                                                  double tau, const PushforwardQuad& quad) {
  PushforwardCore core(bg, par, tau, 1.0, quad);
  CoreResult cr = pushforward_core(core);
  PushforwardResult out;
  const double p = par.p;
  out.value = std::pow(tau, -(1.0 - p) * bg.n) * cr.raw;
  out.radius = cr.radius;
  out.tail_fraction = cr.tail_fraction;
  out.nodes = core.n_nodes.load();
  out.admissible = core.n_admissible.load();
  out.failed = core.n_failed.load();
  out.envelope_violation = core.env_worst;
  out.radial = cr.radial;
  return out;
}

double reduced_volume_pushforward(const BackgroundId& bg, const FlowParams& par, double tau,
                                  const PushforwardQuad& quad) {
  return reduced_volume_pushforward_full(bg, par, tau, quad).value;
}

double reduced_volume_direct(const BackgroundId& bg, const FlowParams& par, double tau) {
  if (bg.kind != BackgroundKind::sphere)
    throw std::invalid_argument("reduced_volume_direct: unsupported on non-compact models");
  validate(par, bg);
  if (!(tau > 0.0) || tau > window_cap(par))
    throw std::invalid_argument("reduced_volume_direct: tau outside the flow window");
  SphereOracle oracle(bg, par.p);
  return oracle.volume_direct(tau, (1.0 - par.p) * bg.n);
}

namespace {

void finish_scan(VolumeScan& scan, double slack, std::optional<double> upper_limit) {
  const size_t m = scan.taus.size();
  scan.weighted.resize(m);
  scan.monotone_ok.assign(m, true);
  scan.all_ok = true;
  scan.worst_slack = 0.0;
  for (size_t i = 0; i < m; ++i) {
    if (!(scan.values[i] > 0.0)) throw std::runtime_error("volume scan: nonpositive volume value");
    scan.weighted[i] = std::exp(scan.log_weighted[i]);
    bool ok = true;
    if (i > 0) {
      double rise = scan.log_weighted[i] - scan.log_weighted[i - 1];
      scan.worst_slack = std::max(scan.worst_slack, rise);
      if (rise > slack) ok = false;
    }
    if (upper_limit && scan.weighted[i] > *upper_limit + slack) ok = false;
    scan.monotone_ok[i] = ok;
    scan.all_ok = scan.all_ok && ok;
  }
}

void require_grid(const std::vector<double>& grid, double hi, const char* who) {
  if (grid.empty()) throw std::invalid_argument(std::string(who) + ": empty grid");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || !(grid[i] < hi)) {
      std::ostringstream os;
      os << who << ": grid time " << grid[i] << " outside the monotonicity window (0, " << hi
         << ")";
      throw std::range_error(os.str());
    }
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw std::invalid_argument(std::string(who) + ": grid must ascend");
  }
}

}  // namespace

VolumeScan monotonicity_scan(const BackgroundId& bg, const FlowParams& par,
                             const std::vector<double>& tau_grid, double c,
                             const PushforwardQuad& quad) {
  validate(par, bg);
  const double p = par.p;
  if (!(p >= 0.5))
    throw std::invalid_argument("monotonicity_scan: corrected-volume window needs p >= 1/2");
  const double r_sup = curvature_bounds(bg).r_sup;
  const double a0 = a0_constant(par, c, r_sup);
  const double tau0 = tau0_constant(par);
  const double tau1 = (p == 0.5) ? window_cap(par) : (1.0 - c) * tau0;
  require_grid(tau_grid, tau1, "monotonicity_scan");

  VolumeScan scan;
  scan.taus = tau_grid;
  scan.A0 = a0;
  scan.tau0 = tau0;
  scan.method = (bg.kind == BackgroundKind::sphere) ? "direct" : "pushforward";
  scan.values.resize(tau_grid.size());
  scan.weights.resize(tau_grid.size());
  scan.log_weighted.resize(tau_grid.size());
  for (size_t i = 0; i < tau_grid.size(); ++i) {
    double v = (bg.kind == BackgroundKind::sphere)
                   ? reduced_volume_direct(bg, par, tau_grid[i])
                   : reduced_volume_pushforward(bg, par, tau_grid[i], quad);
    scan.values[i] = v;
    scan.weights[i] = std::exp(-a0 * tau_grid[i]);
    scan.log_weighted[i] = std::log(v) - a0 * tau_grid[i];
  }
  double limit = std::pow(std::sqrt(kPi) / (1.0 - p), bg.n);
  finish_scan(scan, 1e-6, limit);
  return scan;
}

ZpCheck zp_monotone_check(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                          const std::vector<double>& tau_grid, double c,
                          const SolveOptions& probe) {
  validate(par, bg);
  const double p = par.p;
  if (!(p >= 0.5))
    throw std::invalid_argument("zp_monotone_check: corrected-integrand window needs p >= 1/2");
  const double r_sup = curvature_bounds(bg).r_sup;
  const double a0 = a0_constant(par, c, r_sup);
  const double tau1 = (p == 0.5) ? window_cap(par) : (1.0 - c) * tau0_constant(par);
  require_grid(tau_grid, tau1, "zp_monotone_check");

  const double tau_last = tau_grid.back();
  ShootOptions sh = probe.shoot;
  GeodesicCurve curve = shoot(bg, par, v, tau_last, sh);
  JacobianOptions jopt;
  jopt.shoot = sh;
  std::vector<JacobianRecord> recs =
      exp_jacobian_grid(bg, par, v, tau_grid, JacobianMode::fd_bundle, jopt);
  if (!recs.back().conjugate_times.empty())
    throw std::domain_error("zp_monotone_check: datum develops a conjugate point in the grid");
  for (const JacobianRecord& r : recs)
    if (!(r.jp > 0.0))
      throw std::domain_error("zp_monotone_check: exponential density not positive on the grid");
  if (bg.kind != BackgroundKind::flat) {
    VecN q = curve.endpoint_primary();
    SolveOptions lo = probe;
    lo.lean = true;
    lo.has_hint = true;
    lo.hint = v;
    ReducedSolution sol = solve_lp(bg, par, q, tau_last, lo);
    double l_node = lp_length(curve).L_p;
    if (sol.value.L_p < l_node - 1e-6 * (1.0 + std::fabs(l_node)))
      throw std::domain_error("zp_monotone_check: datum is not minimizing at the last grid time");
  }

  ZpCheck out;
  out.taus = tau_grid;
  out.log_z.resize(tau_grid.size());
  for (size_t i = 0; i < tau_grid.size(); ++i) {
    ActionValue act = lp_length_partial(curve, tau_grid[i]);
    out.log_z[i] = -(1.0 - p) * bg.n * std::log(tau_grid[i]) - act.l_p - a0 * tau_grid[i] +
                   std::log(recs[i].jp);
  }
  const size_t m = tau_grid.size();
  out.dlog_z.assign(m, 0.0);
  for (size_t i = 0; i < m; ++i) {
    size_t lo = i > 0 ? i - 1 : 0;
    size_t hi = i + 1 < m ? i + 1 : m - 1;
    if (hi > lo) out.dlog_z[i] = (out.log_z[hi] - out.log_z[lo]) / (tau_grid[hi] - tau_grid[lo]);
  }
  out.max_violation = 0.0;
  for (double d : out.dlog_z) out.max_violation = std::max(out.max_violation, d);
  out.ok = out.max_violation <= 1e-7;
  return out;
}

double rescaled_volume(const BackgroundId& bg, const FlowParams& par, double tau_bar, double rho,
                       bool enforce_rho_cap, const PushforwardQuad& quad) {
  validate(par, bg);
  if (!(tau_bar > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("rescaled_volume: positive tau_bar and rho required");
  if (enforce_rho_cap && rho > rho_cap(par.p) * (1.0 + 1e-12))
    throw std::range_error("rescaled_volume: rho beyond the admissible rescaled-time cap");
  if (tau_bar * rho > window_cap(par))
    throw std::invalid_argument("rescaled_volume: tau_bar * rho outside the flow window");
  const double p = par.p;
  const int n = bg.n;
  const double pre = std::pow(rho, -(1.0 - p) * n / 2.0);
  const double l_scale = std::pow(tau_bar, 1.0 - 2.0 * p);

  double via_identity, via_rescaled;
  if (bg.kind == BackgroundKind::sphere) {
    SphereOracle base(bg, p);
    via_identity =
        pre * std::pow(tau_bar, -0.5 * n) * base.volume_integral(tau_bar * rho, l_scale);
    SphereOracle scaled(rescale(bg, tau_bar), p);
    via_rescaled = pre * scaled.volume_integral(rho);
  } else {
    PushforwardCore ca(bg, par, tau_bar * rho, l_scale, quad);
    via_identity = pre * std::pow(tau_bar, -0.5 * n) * pushforward_core(ca).raw;
    BackgroundId bgr = rescale(bg, tau_bar);
    FlowParams parr = par;
    parr.t0 = par.t0 > 0.0 ? par.t0 / tau_bar : par.t0;
    parr.tau_max = par.tau_max / tau_bar;
    PushforwardCore cb(bgr, parr, rho, 1.0, quad);
    via_rescaled = pre * pushforward_core(cb).raw;
  }
  double ref = std::max(std::fabs(via_rescaled), std::fabs(via_identity));
  if (!(std::fabs(via_identity - via_rescaled) <= 1e-6 * (ref + 1e-300))) {
    std::ostringstream os;
    os << "rescaled_volume: scaling identity mismatch (" << via_identity << " vs " << via_rescaled
       << ")";
    throw std::runtime_error(os.str());
  }
  return via_rescaled;
}

VolumeScan rescaled_monotonicity_scan(const BackgroundId& bg, const FlowParams& par, double rho,
                                      const std::vector<double>& tau_bar_grid, double tau_bar0,
                                      double c2, double C0) {
  validate(par, bg);
  if (bg.kind != BackgroundKind::sphere)
    throw std::invalid_argument("rescaled_monotonicity_scan: compact model required");
  const double p = par.p;
  if (!(p >= 0.5))
    throw std::invalid_argument("rescaled_monotonicity_scan: needs p >= 1/2");
  if (!(rho > 0.0) || rho > rho_cap(p) * (1.0 + 1e-12))
    throw std::range_error("rescaled_monotonicity_scan: rho outside the admissible cap");

  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
  if (p == 0.5) {
    if (tau_bar0 != 0.0)
      throw std::invalid_argument("rescaled_monotonicity_scan: tau_bar0 must be 0 at p = 1/2");
  } else {
    if (!(tau_bar0 > 0.0) || !(c2 > 0.0) || !(C0 > 0.0))
      throw std::invalid_argument(
          "rescaled_monotonicity_scan: positive tau_bar0, c2, C0 required for p > 1/2");
    // boundary value c = 1 of the drift constant; a0_constant's domain is the
    // open interval, so the limit is taken here directly
    a0 = p / (2.0 - p) * curvature_bounds(bg).r_sup;
    a1 = (2.0 * p - 1.0) * C0;
    a2 = (2.0 * p - 1.0) * C0 / (2.0 * c2 * tau_bar0 * tau_bar0 * tau_bar0);
  }

  if (tau_bar_grid.empty())
    throw std::invalid_argument("rescaled_monotonicity_scan: empty grid");
  for (size_t i = 0; i < tau_bar_grid.size(); ++i) {
    if (!(tau_bar_grid[i] > tau_bar0)) {
      std::ostringstream os;
      os << "rescaled_monotonicity_scan: grid time " << tau_bar_grid[i]
         << " not beyond tau_bar0 = " << tau_bar0;
      throw std::range_error(os.str());
    }
    if (i > 0 && !(tau_bar_grid[i] > tau_bar_grid[i - 1]))
      throw std::invalid_argument("rescaled_monotonicity_scan: grid must ascend");
  }

  VolumeScan scan;
  scan.taus = tau_bar_grid;
  scan.A0 = a0;
  scan.tau0 = tau_bar0;
  scan.method = "direct";
  const size_t m = tau_bar_grid.size();
  scan.values.resize(m);
  scan.weights.resize(m);
  scan.log_weighted.resize(m);
  const double pre = std::pow(rho, -(1.0 - p) * bg.n / 2.0);
  for (size_t i = 0; i < m; ++i) {
    double tb = tau_bar_grid[i];
    SphereOracle oracle(rescale(bg, tb), p);
    double val = pre * oracle.volume_integral(rho);
    double w = (a0 * rho + a1 * std::pow(rho, 2.0 * p) +
                a2 * std::pow(rho, 2.0 * p - 3.0) * std::exp(2.0 * c2 * tb * rho)) *
               tb;
    scan.values[i] = val;
    scan.weights[i] = std::exp(-w);
    scan.log_weighted[i] = std::log(val) - w;
  }
  finish_scan(scan, 1e-6, std::nullopt);
  return scan;
}

}  // namespace lplab
