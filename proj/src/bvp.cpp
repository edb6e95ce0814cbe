#include "lplab/bvp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "lplab/sphere_oracle.hpp"
#include "lplab/util.hpp"

namespace lplab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct RootInfo {
  VecN v;
  double action = 0.0;
  double residual = kInf;
  bool ok = false;
};

// endpoint residual in the primary chart; throws from shoot propagate
VecN endpoint_residual(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                       double tau_bar, const VecN& q, const ShootOptions& sh) {
  VecN end = lp_exp(bg, par, v, tau_bar, sh);
  return VecN(end - q);
}

// map a g(p0,0)-orthonormal vector to chart components
struct VelocityFrame {
  MatN l_t_inv;  // inverse transpose Cholesky factor of g(p0,0)
  VecN to_chart(const VecN& w) const { return l_t_inv * w; }
};

VelocityFrame velocity_frame(const BackgroundId& bg, const FlowParams& par) {
  MetricJet j0 = sample_jet(bg, par.p0, 0.0);
  Eigen::LLT<MatN> llt(j0.g);
  MatN lt = llt.matrixL().transpose();
  VelocityFrame f;
  f.l_t_inv = lt.inverse();
  return f;
}

VecN halton_ball_point(std::uint64_t idx, int n, double radius) {
  VecN w(n);
  if (n == 1) {
    w(0) = radius * (2.0 * halton(idx, 2) - 1.0);
  } else if (n == 2) {
    double r = radius * std::sqrt(halton(idx, 2));
    double phi = 2.0 * M_PI * halton(idx, 3);
    w(0) = r * std::cos(phi);
    w(1) = r * std::sin(phi);
  } else {
    double r = radius * std::cbrt(halton(idx, 2));
    double ct = 2.0 * halton(idx, 3) - 1.0;
    double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    double phi = 2.0 * M_PI * halton(idx, 5);
    w(0) = r * st * std::cos(phi);
    w(1) = r * st * std::sin(phi);
    w(2) = r * ct;
  }
  return w;
}

double g0_norm(const BackgroundId& bg, const FlowParams& par, const VecN& v) {
  MetricJet j0 = sample_jet(bg, par.p0, 0.0);
  return norm_g(j0.g, v);
}

}  // namespace

double velocity_ball_radius(const BackgroundId& bg, const FlowParams& par, const VecN& q,
                            double tau_bar) {
  const double p = par.p;
  LpBoundsValue lb = lp_bounds(bg, par, q, tau_bar);
  if (!(lb.upper >= lb.lower)) {
    throw std::runtime_error("velocity_ball_radius: action window is degenerate");
  }
  const double U = std::max(lb.upper, 0.0);
  const CurvatureBounds cb = curvature_bounds(bg);
  const double K1 = cb.k1_sup;
  const double A1 = std::max(1.0 / ((1.0 - p) * (1.0 - p)), 2.0 / (1.0 - p));
  const double C2 = 2.0 * (1.0 - p) * A1 * K1;
  const double C3 = C2 / (8.0 * (1.0 + 2.0 * p));
  const double s_bar = std::pow(tau_bar, 1.0 - p);

  // total s-speed budget of any curve within the action window
  double kin = (U + K1 * std::pow(s_bar, (1.0 + p) / (1.0 - p)) / (1.0 + p)) / (1.0 - p);
  double tail = C3 * std::pow(s_bar, (2.0 + p) / (1.0 - p)) * (1.0 - p) / (2.0 + p);
  double grow = (C2 * tau_bar < 500.0) ? std::exp(C2 * tau_bar) : kInf;
  double v_env = std::isinf(grow) ? kInf : 1.25 * (1.0 - p) * std::sqrt(grow * (kin + tail) / s_bar);

  // The growth factor is vacuous on strongly curved windows; keep the sweep
  // inside a radius that still covers the minimizer's kinetic budget and, on
  // the sphere, the first winding.
  VecN diff(q - par.p0);
  double straight = g0_norm(bg, par, VecN((1.0 - p) / s_bar * diff));
  double prac = std::max(4.0 * straight + 1.0, 8.0 * std::sqrt((1.0 - p) * U) / s_bar + 1.0);
  if (bg.kind == BackgroundKind::sphere) {
    SphereOracle oracle(bg, p);
    double conj_chart = oracle.conjugate_v_chart(tau_bar);
    prac = std::max(prac, 2.5 * conj_chart * std::sqrt(oracle.c_of(0.0)));
  }
  return std::min(v_env, prac);
}

ReducedSolution solve_lp(const BackgroundId& bg, const FlowParams& par, const VecN& q,
                         double tau_bar, const SolveOptions& opt) {
  validate(par, bg);
  if (!(tau_bar > 0.0) || tau_bar > window_cap(par))
    throw std::invalid_argument("solve_lp: tau_bar outside the flow window");
  if (q.size() != bg.n) throw std::invalid_argument("solve_lp: target dimension mismatch");
  const int n = bg.n;
  const double p = par.p;
  const double s_bar = std::pow(tau_bar, 1.0 - p);
  const double res_scale = 1.0 + q.cwiseAbs().maxCoeff();
  const double res_tol = opt.residual_tol * res_scale;

  // start list: warm hint, straight-chart guess, sphere windings, Halton ball
  std::vector<VecN> starts;
  if (opt.lean && opt.has_hint) starts.push_back(opt.hint);
  VecN straight((1.0 - p) / s_bar * (q - par.p0));
  starts.push_back(straight);
  double theta_q = straight.norm();
  if (bg.kind == BackgroundKind::sphere && opt.windings && theta_q > 1e-12) {
    VecN dir = straight / theta_q;
    double mag0 = (q - par.p0).norm();
    for (int m : {1, -1}) {
      double wrapped = mag0 + 2.0 * M_PI * m;
      starts.push_back(VecN((1.0 - p) / s_bar * wrapped * dir));
    }
  }
  const int target_starts = opt.lean ? std::max(opt.lean_starts, 1) : std::max(opt.starts, 1);
  if (static_cast<int>(starts.size()) < target_starts) {
    double ball = velocity_ball_radius(bg, par, q, tau_bar);
    VelocityFrame frame = velocity_frame(bg, par);
    std::uint64_t idx0 = static_cast<std::uint64_t>(opt.seed) * 65537ull;
    for (int i = 0; static_cast<int>(starts.size()) < target_starts; ++i)
      starts.push_back(frame.to_chart(halton_ball_point(idx0 + i, n, ball)));
  }

  auto feval = [&](const VecN& v, VecN& out) -> bool {
    try {
      out = endpoint_residual(bg, par, v, tau_bar, q, opt.shoot);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  };

  std::vector<RootInfo> roots;
  double best_seen = kInf;
  auto near_known_root = [&](const VecN& v) -> int {
    for (size_t k = 0; k < roots.size(); ++k)
      if ((v - roots[k].v).norm() <= opt.cluster_tol * (1.0 + roots[k].v.norm())) return (int)k;
    return -1;
  };

  const double fd_h0 = 1e-6;
  auto fd_jacobian = [&](const VecN& v, MatN& J) -> bool {
    double h = fd_h0 * std::max(1.0, v.norm());
    J.resize(n, n);
    for (int j = 0; j < n; ++j) {
      VecN vp = v, vm = v, Fp(n), Fm(n);
      vp(j) += h;
      vm(j) -= h;
      if (!feval(vp, Fp) || !feval(vm, Fm)) return false;
      J.col(j) = (Fp - Fm) / (2.0 * h);
    }
    return true;
  };

  for (const VecN& start : starts) {
    VecN v = start, F(n);
    if (!feval(v, F)) continue;
    MatN J;
    bool haveJ = fd_jacobian(v, J);
    if (!haveJ) continue;
    double lam = 1e-3;
    int since_rebuild = 0;
    bool converged = false;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
      best_seen = std::min(best_seen, F.cwiseAbs().maxCoeff());
      if (F.cwiseAbs().maxCoeff() <= res_tol) {
        converged = true;
        break;
      }
      int known = near_known_root(v);
      if (known >= 0 && F.cwiseAbs().maxCoeff() < 1e-5 * res_scale) break;  // joins that basin
      MatN JtJ = J.transpose() * J;
      VecN g = J.transpose() * F;
      bool stepped = false;
      for (int inner = 0; inner < 10; ++inner) {
        MatN A = JtJ;
        for (int d = 0; d < n; ++d) A(d, d) += lam * std::max(JtJ(d, d), 1e-12);
        VecN delta = A.ldlt().solve(VecN(-g));
        VecN vn = v + delta, Fn(n);
        if (feval(vn, Fn) && Fn.norm() < F.norm()) {
          VecN dF = Fn - F;
          VecN dv = delta;
          double dd = dv.squaredNorm();
          if (dd > 0) J += ((dF - J * dv) * dv.transpose()) / dd;  // Broyden refresh
          v = vn;
          F = Fn;
          lam = std::max(lam / 3.0, 1e-12);
          stepped = true;
          ++since_rebuild;
          break;
        }
        lam *= 4.0;
        if (lam > 1e10) break;
      }
      if (!stepped || since_rebuild >= 2 * n + 4) {
        if (!fd_jacobian(v, J)) break;
        since_rebuild = 0;
        if (!stepped) {
          lam *= 4.0;
          if (lam > 1e12) break;
        }
      }
    }
    if (!converged) continue;
    int known = near_known_root(v);
    if (known >= 0) {
      if (F.cwiseAbs().maxCoeff() < roots[known].residual) {
        roots[known].v = v;
        roots[known].residual = F.cwiseAbs().maxCoeff();
      }
      continue;
    }
    RootInfo r;
    r.v = v;
    r.residual = F.cwiseAbs().maxCoeff();
    r.ok = true;
    roots.push_back(std::move(r));
  }

  if (roots.empty()) {
    std::ostringstream os;
    os << "solve_lp: no start converged (best endpoint defect " << best_seen << ")";
    throw std::runtime_error(os.str());
  }

  for (RootInfo& r : roots) {
    GeodesicCurve c = shoot(bg, par, r.v, tau_bar, opt.shoot);
    r.action = lp_length(c).L_p;
  }
  std::sort(roots.begin(), roots.end(),
            [](const RootInfo& a, const RootInfo& b) { return a.action < b.action; });

  const RootInfo& best = roots.front();
  ReducedSolution sol;
  sol.q = q;
  sol.tau_bar = tau_bar;
  sol.v_star = best.v;
  sol.curve = shoot(bg, par, best.v, tau_bar, opt.shoot);
  sol.value = lp_length(sol.curve);
  sol.residual = best.residual;
  sol.basin_count = static_cast<int>(roots.size());
  sol.basin_separation = roots.size() > 1 ? roots[1].action - roots[0].action : kInf;

  if (opt.lean) {
    sol.conjugate_free = false;
    sol.in_omega = false;
    return sol;
  }
  JacobianOptions jopt;
  jopt.shoot = opt.shoot;
  JacobianRecord rec = exp_jacobian(bg, par, best.v, tau_bar, JacobianMode::fd_bundle, jopt);
  sol.conjugate_free = rec.conjugate_times.empty() && rec.jp > 0.0;
  bool unique_min =
      roots.size() < 2 || sol.basin_separation > opt.tie_tol * (1.0 + std::fabs(sol.value.L_p));
  sol.in_omega = unique_min && sol.conjugate_free;
  return sol;
}

GradCheck grad_L_check(const BackgroundId& bg, const FlowParams& par, const ReducedSolution& sol,
                       double fd_step) {
  if (!sol.in_omega)
    throw std::domain_error("grad_L_check: solution is not inside the injectivity domain");
  const int n = bg.n;
  const double p = par.p;
  const double s_bar = std::pow(sol.tau_bar, 1.0 - p);

  CurveState end = sol.curve.state_at_in_chart(s_bar, 0);
  VecN x_tau((1.0 - p) * std::pow(s_bar, -p / (1.0 - p)) * end.u);
  MetricJet jet = sample_jet(bg, sol.q, sol.tau_bar);
  GradCheck out;
  out.formula = VecN(2.0 * std::pow(sol.tau_bar, p) * (jet.g * x_tau));

  SolveOptions warm;
  warm.lean = true;
  warm.has_hint = true;
  warm.hint = sol.v_star;
  warm.lean_starts = 2;
  warm.windings = false;
  warm.shoot.rtol = 1e-11;
  warm.shoot.atol = 1e-11;
  warm.residual_tol = 1e-10;

  double h = fd_step;
  out.fd.resize(n);
  for (int i = 0; i < n; ++i) {
    VecN qp = sol.q, qm = sol.q;
    qp(i) += h;
    qm(i) -= h;
    double Lp_ = solve_lp(bg, par, qp, sol.tau_bar, warm).value.L_p;
    double Lm_ = solve_lp(bg, par, qm, sol.tau_bar, warm).value.L_p;
    out.fd(i) = (Lp_ - Lm_) / (2.0 * h);
  }
  VecN diff(out.fd - out.formula);
  double ref = std::sqrt(double(out.formula.transpose() * (jet.g_inv * out.formula)));
  double err = std::sqrt(double(diff.transpose() * (jet.g_inv * diff)));
  out.rel_error = err / std::max(ref, 1e-12);
  return out;
}

LaplacianCheck laplacian_L_check(const BackgroundId& bg, const FlowParams& par,
                                 const ReducedSolution& sol, double fd_step) {
  if (!sol.in_omega)
    throw std::domain_error("laplacian_L_check: solution is not inside the injectivity domain");
  const int n = bg.n;
  const double p = par.p;
  const double tau = sol.tau_bar;

  SolveOptions warm;
  warm.lean = true;
  warm.has_hint = true;
  warm.hint = sol.v_star;
  warm.lean_starts = 2;
  warm.windings = false;
  warm.shoot.rtol = 1e-11;
  warm.shoot.atol = 1e-11;
  warm.residual_tol = 1e-10;

  auto L_at = [&](const VecN& x) { return solve_lp(bg, par, x, tau, warm).value.L_p; };

  const double h = fd_step;
  const double L0 = sol.value.L_p;
  MatN hess(n, n);
  VecN grad(n);
  std::vector<double> axis_p(n), axis_m(n);
  for (int i = 0; i < n; ++i) {
    VecN qp = sol.q, qm = sol.q;
    qp(i) += h;
    qm(i) -= h;
    axis_p[i] = L_at(qp);
    axis_m[i] = L_at(qm);
    grad(i) = (axis_p[i] - axis_m[i]) / (2.0 * h);
    hess(i, i) = (axis_p[i] - 2.0 * L0 + axis_m[i]) / (h * h);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      VecN qpp = sol.q, qpm = sol.q, qmp = sol.q, qmm = sol.q;
      qpp(i) += h;
      qpp(j) += h;
      qpm(i) += h;
      qpm(j) -= h;
      qmp(i) -= h;
      qmp(j) += h;
      qmm(i) -= h;
      qmm(j) -= h;
      double v = (L_at(qpp) - L_at(qpm) - L_at(qmp) + L_at(qmm)) / (4.0 * h * h);
      hess(i, j) = v;
      hess(j, i) = v;
    }

  MetricJet jet = sample_jet(bg, sol.q, tau);
  double lap = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double corr = 0.0;
      for (int k = 0; k < n; ++k) corr += jet.christoffel.at(k, i, j) * grad(k);
      lap += jet.g_inv(i, j) * (hess(i, j) - corr);
    }

  LaplacianCheck out;
  out.lhs = lap;
  out.rhs = -2.0 * std::pow(tau, p) * jet.scalar_R + n / (2.0 * p * std::pow(tau, 1.0 - p)) +
            (2.0 * p - 1.0) / tau * curve_integral_R(sol.curve, p, tau) -
            curve_integral_H(sol.curve, p + 1.0, tau) / tau;
  out.violation = std::max(0.0, out.lhs - out.rhs);
  return out;
}

std::vector<GpRow> g_p_scan(const BackgroundId& bg, const FlowParams& par,
                            const std::vector<double>& taus, const std::vector<VecN>& grid_q,
                            const SolveOptions& opt) {
  if (grid_q.empty()) throw std::invalid_argument("g_p_scan: empty point grid");
  const double p = par.p;
  std::vector<GpRow> rows;
  rows.reserve(taus.size());
  std::vector<VecN> hints(grid_q.size());
  std::vector<bool> has_hint(grid_q.size(), false);
  for (double tau : taus) {
    GpRow row;
    row.tau = tau;
    row.g_p = kInf;
    for (size_t k = 0; k < grid_q.size(); ++k) {
      SolveOptions o = opt;
      if (has_hint[k]) {
        o.lean = true;
        o.has_hint = true;
        o.hint = hints[k];
      }
      ReducedSolution sol = solve_lp(bg, par, grid_q[k], tau, o);
      hints[k] = sol.v_star;
      has_hint[k] = true;
      double g = std::pow(tau, 1.0 - p) * sol.value.L_p - bg.n / (2.0 * p) * tau;
      if (g < row.g_p) {
        row.g_p = g;
        row.argmin = grid_q[k];
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

MinLpCheck min_lp_bound_check(const BackgroundId& bg, const FlowParams& par, double tau,
                              const std::vector<VecN>& grid_q, const SolveOptions& opt) {
  if (grid_q.empty()) throw std::invalid_argument("min_lp_bound_check: empty point grid");
  MinLpCheck out;
  out.min_lp = kInf;
  for (const VecN& q : grid_q) {
    ReducedSolution sol = solve_lp(bg, par, q, tau, opt);
    if (sol.value.l_p < out.min_lp) {
      out.min_lp = sol.value.l_p;
      out.argmin = q;
    }
  }
  const double p = par.p;
  out.bound = bg.n * (1.0 - p) / (2.0 * p * std::pow(tau, 1.0 - 2.0 * p));
  out.ok = out.min_lp <= out.bound + 1e-6 * (1.0 + std::fabs(out.bound));
  return out;
}

double lp_pde_residual(const BackgroundId& bg, const FlowParams& par,
                       const std::function<double(const VecN&, double)>& l_field,
                       const VecN& center, double half_width, int m, double tau) {
  if (bg.kind != BackgroundKind::flat)
    throw std::invalid_argument("lp_pde_residual: flat background required");
  if (par.p != 0.5)
    throw std::invalid_argument("lp_pde_residual: supported only at p = 1/2");
  if (m < 3) throw std::invalid_argument("lp_pde_residual: need at least 3 points per axis");
  if (!(half_width > 0.0) || !(tau > 0.0))
    throw std::invalid_argument("lp_pde_residual: positive half_width and tau required");
  const int n = bg.n;
  const double h = 2.0 * half_width / (m - 1);
  const double ht = 1e-4 * tau;

  std::vector<int> idx(n, 0);
  double sup = 0.0;
  for (;;) {
    VecN x(n);
    for (int d = 0; d < n; ++d) x(d) = center(d) - half_width + idx[d] * h;

    MetricJet jet = sample_jet(bg, x, tau);
    double l0 = l_field(x, tau);
    double l_tau = (l_field(x, tau + ht) - l_field(x, tau - ht)) / (2.0 * ht);
    VecN grad(n);
    MatN hess = MatN::Zero(n, n);
    std::vector<double> lp_(n), lm_(n);
    for (int d = 0; d < n; ++d) {
      VecN xp = x, xm = x;
      xp(d) += h;
      xm(d) -= h;
      lp_[d] = l_field(xp, tau);
      lm_[d] = l_field(xm, tau);
      grad(d) = (lp_[d] - lm_[d]) / (2.0 * h);
      hess(d, d) = (lp_[d] - 2.0 * l0 + lm_[d]) / (h * h);
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        VecN xpp = x, xpm = x, xmp = x, xmm = x;
        xpp(a) += h;
        xpp(b) += h;
        xpm(a) += h;
        xpm(b) -= h;
        xmp(a) -= h;
        xmp(b) += h;
        xmm(a) -= h;
        xmm(b) -= h;
        double v = (l_field(xpp, tau) - l_field(xpm, tau) - l_field(xmp, tau) + l_field(xmm, tau)) /
                   (4.0 * h * h);
        hess(a, b) = v;
        hess(b, a) = v;
      }

    double lap = 0.0, grad2 = 0.0;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        lap += jet.g_inv(a, b) * hess(a, b);  // flat chart, no connection term
        grad2 += jet.g_inv(a, b) * grad(a) * grad(b);
      }
    double res = l_tau - lap + grad2 - jet.scalar_R + n / (2.0 * tau);
    sup = std::max(sup, std::fabs(res));

    int d = 0;
    while (d < n && ++idx[d] == m) idx[d++] = 0;
    if (d == n) break;
  }
  return sup;
}

}  // namespace lplab
