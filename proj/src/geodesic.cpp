#include "lplab/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lplab {

namespace {

struct SystemCoefs {
  double p;
  double c1_of(double s) const {
    double e = 2.0 * p / (1.0 - p);
    return (s > 0.0 ? std::pow(s, e) : 0.0) / (2.0 * (1.0 - p) * (1.0 - p));
  }
  double c2_of(double s) const {
    double e = p / (1.0 - p);
    return 2.0 / (1.0 - p) * (s > 0.0 ? std::pow(s, e) : 0.0);
  }
  double tau_of(double s) const { return s > 0.0 ? std::pow(s, 1.0 / (1.0 - p)) : 0.0; }
};

VecN force_term(const MetricJet& j, const SystemCoefs& co, double s, const VecN& u) {
  VecN f = -j.christoffel.contract(u, u);
  double c1 = co.c1_of(s), c2 = co.c2_of(s);
  if (c1 != 0.0) f += c1 * (j.g_inv * j.grad_R);
  if (c2 != 0.0) f -= c2 * (j.g_inv * (j.ric * u));
  return f;
}

double curvature_magnitude(const MetricJet& j) {
  double grad2 = j.grad_R.dot(j.g_inv * j.grad_R);
  return std::abs(j.scalar_R) + std::sqrt(std::max(0.0, grad2)) + operator_norm(j.g, j.ric);
}

}  // namespace

double GeodesicCurve::s_of_tau(double tau) const { return std::pow(tau, 1.0 - par.p); }
double GeodesicCurve::tau_of_s(double s) const { return s > 0.0 ? std::pow(s, 1.0 / (1.0 - par.p)) : 0.0; }

const MatE& GeodesicCurve::frame(int chart) const {
  if (charts.empty()) throw std::logic_error("frame: curve has no chart atlas (flat/cigar)");
  return charts.at(static_cast<size_t>(chart));
}

CurveState GeodesicCurve::state_at(double s) const {
  if (steps.empty()) throw std::logic_error("state_at: empty curve");
  double lo = steps.front().ode.s0, hi = steps.back().ode.s1;
  if (s < lo - 1e-12 * (hi - lo) || s > hi + 1e-12 * (hi - lo))
    throw std::domain_error("state_at: s outside the integrated range");
  s = std::min(std::max(s, lo), hi);
  // binary search for the step containing s
  size_t a = 0, b = steps.size() - 1;
  while (a < b) {
    size_t mid = (a + b) / 2;
    if (steps[mid].ode.s1 < s)
      a = mid + 1;
    else
      b = mid;
  }
  const CurveStep& st = steps[a];
  StateVec y, dy;
  hermite_eval(st.ode, s, &y, &dy);
  int nn = bg.n;
  CurveState out;
  out.chart = st.chart;
  out.x = y.segment(0, nn);
  out.u = y.segment(nn, nn);
  out.du = dy.segment(nn, nn);
  return out;
}

CurveState GeodesicCurve::state_at_in_chart(double s, int chart) const {
  CurveState cs = state_at(s);
  if (cs.chart == chart) return cs;
  if (bg.kind != BackgroundKind::sphere)
    throw std::logic_error("state_at_in_chart: chart transfer without an atlas");
  const MatE& from = frame(cs.chart);
  const MatE& to = frame(chart);
  CurveState out;
  out.chart = chart;
  out.x = chart_point_to(from, cs.x, to);
  out.u = chart_velocity_to(from, cs.x, cs.u, to);
  out.du = VecN::Zero(bg.n);  // second derivatives are not transferred
  return out;
}

VecN GeodesicCurve::endpoint_primary() const {
  CurveState cs = state_at(s_bar);
  if (bg.kind != BackgroundKind::sphere || cs.chart == 0) return cs.x;
  return chart_point_to(frame(cs.chart), cs.x, frame(0));
}

std::vector<double> GeodesicCurve::node_s() const {
  std::vector<double> out;
  out.reserve(steps.size() + 1);
  out.push_back(steps.front().ode.s0);
  for (const auto& st : steps) out.push_back(st.ode.s1);
  return out;
}

std::vector<CurveState> GeodesicCurve::node_states() const {
  std::vector<CurveState> out;
  out.reserve(steps.size() + 1);
  int nn = bg.n;
  CurveState first;
  first.chart = steps.front().chart;
  first.x = steps.front().ode.y0.segment(0, nn);
  first.u = steps.front().ode.y0.segment(nn, nn);
  first.du = steps.front().ode.f0.segment(nn, nn);
  out.push_back(first);
  for (const auto& st : steps) {
    CurveState cs;
    cs.chart = st.chart;
    cs.x = st.ode.y1.segment(0, nn);
    cs.u = st.ode.y1.segment(nn, nn);
    cs.du = st.ode.f1.segment(nn, nn);
    out.push_back(cs);
  }
  return out;
}

GeodesicCurve shoot(const BackgroundId& bg, const FlowParams& par, const VecN& v, double tau_bar,
                    const ShootOptions& opt) {
  validate(par, bg);
  if (v.size() != bg.n) throw std::invalid_argument("shoot: datum dimension mismatch");
  if (!(tau_bar > 0.0)) throw std::invalid_argument("shoot: tau_bar must be positive");
  if (tau_bar > par.tau_max) throw std::invalid_argument("shoot: tau_bar beyond tau_max");

  SystemCoefs co{par.p};
  double s_bar = std::pow(tau_bar, 1.0 - par.p);
  int nn = bg.n;

  GeodesicCurve curve;
  curve.bg = bg;
  curve.par = par;
  curve.v = v;
  curve.tau_bar = tau_bar;
  curve.s_bar = s_bar;
  if (bg.kind == BackgroundKind::sphere) curve.charts.push_back(identity_frame(nn));

  int current_chart = 0;
  // speed envelope bookkeeping: |u(s)|^2 may not exceed
  //   factor * e^{C2 tau} (w0 + C3 s^{(1+2p)/(1-p)}),
  // with C2, C3 rebuilt from the running curvature sup along the swept arc.
  MetricJet j0 = sample_jet(bg, par.p0, 0.0);
  VecN u0 = v / (1.0 - par.p);
  double w0 = inner(j0.g, u0, u0);
  double k1_run = curvature_magnitude(j0);
  double a1 = std::max(1.0 / ((1.0 - par.p) * (1.0 - par.p)), 2.0 / (1.0 - par.p));

  auto rhs = [&](double s, const StateVec& y) -> StateVec {
    VecN x = y.segment(0, nn), u = y.segment(nn, nn);
    MetricJet j = sample_jet(bg, x, co.tau_of(s));
    StateVec f(2 * nn);
    f.segment(0, nn) = u;
    f.segment(nn, nn) = force_term(j, co, s, u);
    return f;
  };

  auto after = [&](const OdeStep& st) -> EventAction {
    VecN x = st.y1.segment(0, nn), u = st.y1.segment(nn, nn);
    double tau = co.tau_of(st.s1);
    MetricJet j = sample_jet(bg, x, tau);

    k1_run = std::max(k1_run, curvature_magnitude(j));
    double c1c = a1 * k1_run, c2c = 2.0 * (1.0 - par.p) * c1c, c3c = c2c / (8.0 * (1.0 + 2.0 * par.p));
    double env = std::exp(c2c * tau) *
                 (w0 + c3c * std::pow(st.s1, (1.0 + 2.0 * par.p) / (1.0 - par.p)));
    double speed2 = inner(j.g, u, u);
    if (speed2 > opt.envelope_factor * (env + 1e-300)) {
      std::ostringstream os;
      os << "shoot: speed left the admissible envelope at s=" << st.s1 << " (|u|^2=" << speed2
         << ", envelope=" << env << ")";
      throw std::runtime_error(os.str());
    }

    if (bg.kind == BackgroundKind::sphere && x.norm() > M_PI - 0.1) {
      if (!opt.allow_rotation)
        throw std::runtime_error("shoot: crossed the chart guard with rotation disabled");
      if (curve.rotations >= opt.max_rotations)
        throw std::runtime_error("shoot: left the atlas budget (antipodal winding)");
      const MatE& from = curve.charts[current_chart];
      MatE next = recenter_frame(from, x);
      VecN x2 = chart_point_to(from, x, next);
      VecN u2 = chart_velocity_to(from, x, u, next);
      curve.charts.push_back(next);
      current_chart = static_cast<int>(curve.charts.size()) - 1;
      curve.rotations += 1;
      StateVec repl(2 * nn);
      repl.segment(0, nn) = x2;
      repl.segment(nn, nn) = u2;
      return EventAction::replace(repl);
    }
    return EventAction::proceed();
  };

  StateVec y0(2 * nn);
  y0.segment(0, nn) = par.p0;
  y0.segment(nn, nn) = u0;

  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.max_step = s_bar * opt.max_step_frac;

  // the event may change current_chart between steps; tag each step as it lands
  std::vector<int> chart_of_step;
  auto tagging_after = [&](const OdeStep& st) -> EventAction {
    chart_of_step.push_back(current_chart);
    return after(st);
  };

  OdeResult res = integrate_ode(rhs, y0, 0.0, s_bar, oo, tagging_after);
  if (res.status != OdeStatus::ok) {
    std::ostringstream os;
    os << "shoot: integration failed (" << res.message << ") at s=" << res.s_reached << " of "
       << s_bar;
    throw std::runtime_error(os.str());
  }

  curve.steps.reserve(res.steps.size());
  for (size_t i = 0; i < res.steps.size(); ++i) {
    CurveStep cs;
    cs.ode = res.steps[i];
    cs.chart = chart_of_step[i];
    curve.steps.push_back(std::move(cs));
  }
  return curve;
}

GeodesicCurve curve_from_nodes(const BackgroundId& bg, const FlowParams& par,
                               const std::vector<double>& s_nodes, const std::vector<VecN>& xs,
                               const std::vector<VecN>& us) {
  if (s_nodes.size() < 2 || xs.size() != s_nodes.size() || us.size() != s_nodes.size())
    throw std::invalid_argument("curve_from_nodes: inconsistent node arrays");
  GeodesicCurve curve;
  curve.bg = bg;
  curve.par = par;
  curve.v = us.front() * (1.0 - par.p);
  curve.s_bar = s_nodes.back();
  curve.tau_bar = std::pow(curve.s_bar, 1.0 / (1.0 - par.p));
  curve.has_accel = false;
  if (bg.kind == BackgroundKind::sphere) curve.charts.push_back(identity_frame(bg.n));
  int nn = bg.n;
  for (size_t i = 0; i + 1 < s_nodes.size(); ++i) {
    if (!(s_nodes[i + 1] > s_nodes[i]))
      throw std::invalid_argument("curve_from_nodes: s nodes must increase");
    CurveStep st;
    st.chart = 0;
    st.ode.s0 = s_nodes[i];
    st.ode.s1 = s_nodes[i + 1];
    st.ode.y0.resize(2 * nn);
    st.ode.y1.resize(2 * nn);
    st.ode.f0 = StateVec::Zero(2 * nn);
    st.ode.f1 = StateVec::Zero(2 * nn);
    st.ode.y0.segment(0, nn) = xs[i];
    st.ode.y0.segment(nn, nn) = us[i];
    st.ode.y1.segment(0, nn) = xs[i + 1];
    st.ode.y1.segment(nn, nn) = us[i + 1];
    st.ode.f0.segment(0, nn) = us[i];
    st.ode.f1.segment(0, nn) = us[i + 1];
    curve.steps.push_back(std::move(st));
  }
  return curve;
}

VecN lp_exp(const BackgroundId& bg, const FlowParams& par, const VecN& v, double tau_bar,
            const ShootOptions& opt) {
  return shoot(bg, par, v, tau_bar, opt).endpoint_primary();
}

double el_residual(const GeodesicCurve& curve) {
  SystemCoefs co{curve.par.p};
  int nn = curve.bg.n;
  double worst = 0.0;
  if (curve.has_accel) {
    auto check = [&](const StateVec& y, const StateVec& f, double s) {
      VecN x = y.segment(0, nn), u = y.segment(nn, nn);
      MetricJet j = sample_jet(curve.bg, x, co.tau_of(s));
      VecN r = VecN(f.segment(nn, nn)) - force_term(j, co, s, u);
      worst = std::max(worst, norm_g(j.g, r));
    };
    check(curve.steps.front().ode.y0, curve.steps.front().ode.f0, curve.steps.front().ode.s0);
    for (const auto& st : curve.steps) check(st.ode.y1, st.ode.f1, st.ode.s1);
    return worst;
  }
  // node-assembled curve: centered differences of the node velocities
  auto ss = curve.node_s();
  auto states = curve.node_states();
  for (size_t i = 1; i + 1 < ss.size(); ++i) {
    VecN udd = (states[i + 1].u - states[i - 1].u) / (ss[i + 1] - ss[i - 1]);
    MetricJet j = sample_jet(curve.bg, states[i].x, co.tau_of(ss[i]));
    VecN r = udd - force_term(j, co, ss[i], states[i].u);
    worst = std::max(worst, norm_g(j.g, r));
  }
  return worst;
}

// --- jacobians ----------------------------------------------------------------

namespace {

struct DetProbe {
  // |det| below det_floor times the running max, or a sign change, marks a
  // conjugate parameter; crossings are bisected to 1e-8 in s.
  std::vector<double> scan(const std::function<double(double)>& det, const std::vector<double>& grid,
                           double det_floor) const {
    std::vector<double> hits;
    double runmax = 0.0;
    double prev_s = grid.front();
    double prev_d = det(prev_s);
    runmax = std::max(runmax, std::abs(prev_d));
    for (size_t i = 1; i < grid.size(); ++i) {
      double s = grid[i], d = det(s);
      if (d == 0.0) {
        hits.push_back(s);
      } else if (prev_d != 0.0 && std::signbit(d) != std::signbit(prev_d)) {
        double a = prev_s, b = s, da = prev_d;
        while (b - a > 1e-8) {
          double m = 0.5 * (a + b), dm = det(m);
          if (dm == 0.0) {
            a = b = m;
            break;
          }
          if (std::signbit(dm) == std::signbit(da)) {
            a = m;
            da = dm;
          } else {
            b = m;
          }
        }
        hits.push_back(0.5 * (a + b));
      } else if (runmax > 0.0 && std::abs(d) < det_floor * runmax) {
        hits.push_back(s);
      }
      runmax = std::max(runmax, std::abs(d));
      prev_s = s;
      prev_d = d;
    }
    // cluster near-duplicates from dip detection around an actual crossing
    std::sort(hits.begin(), hits.end());
    std::vector<double> out;
    for (double h : hits)
      if (out.empty() || h - out.back() > 1e-7) out.push_back(h);
    return out;
  }
};

std::vector<double> dense_s_grid(const GeodesicCurve& base, int per_step) {
  std::vector<double> grid;
  for (const auto& st : base.steps) {
    for (int k = 1; k <= per_step; ++k)
      grid.push_back(st.ode.s0 + (st.ode.s1 - st.ode.s0) * k / (per_step + 1.0));
    grid.push_back(st.ode.s1);
  }
  return grid;
}

struct FdBundle {
  GeodesicCurve base;
  std::vector<GeodesicCurve> plus, minus;
  double h = 0.0;

  MatN matrix_at(double s) const {
    int nn = base.bg.n;
    MatN m(nn, nn);
    CurveState bs = base.state_at(s);
    bool sphere = base.bg.kind == BackgroundKind::sphere;
    for (int c = 0; c < nn; ++c) {
      VecN xp, xm;
      if (sphere) {
        const MatE& to = base.frame(bs.chart);
        CurveState sp = plus[c].state_at(s);
        CurveState sm = minus[c].state_at(s);
        xp = chart_point_to(plus[c].frame(sp.chart), sp.x, to);
        xm = chart_point_to(minus[c].frame(sm.chart), sm.x, to);
      } else {
        xp = plus[c].state_at(s).x;
        xm = minus[c].state_at(s).x;
      }
      m.col(c) = (xp - xm) / (2.0 * h);
    }
    return m;
  }
};

FdBundle make_fd_bundle(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                        double tau_bar, const JacobianOptions& opt) {
  FdBundle b;
  b.base = shoot(bg, par, v, tau_bar, opt.shoot);
  b.h = opt.fd_step * std::max(1.0, v.norm());
  for (int c = 0; c < bg.n; ++c) {
    VecN vp = v, vm = v;
    vp[c] += b.h;
    vm[c] -= b.h;
    b.plus.push_back(shoot(bg, par, vp, tau_bar, opt.shoot));
    b.minus.push_back(shoot(bg, par, vm, tau_bar, opt.shoot));
  }
  return b;
}

double jp_from_matrix(const GeodesicCurve& base, double s, const MatN& m) {
  CurveState cs = base.state_at(s);
  MetricJet jend = sample_jet(base.bg, cs.x, base.tau_of_s(s));
  MetricJet j0 = sample_jet(base.bg, base.par.p0, 0.0);
  return std::sqrt(det_spd(jend.g) / det_spd(j0.g)) * m.determinant();
}

}  // namespace

namespace {

// state layout of the joint system: [x u Y Z], Y and Z column-major n x n blocks
StateVec joint_state_at(const GeodesicCurve& c, double s) {
  const CurveStep* stp = &c.steps.back();
  for (const auto& st : c.steps)
    if (s <= st.ode.s1 + 1e-15) {
      stp = &st;
      break;
    }
  StateVec y;
  hermite_eval(stp->ode, std::min(std::max(s, stp->ode.s0), stp->ode.s1), &y, nullptr);
  return y;
}

}  // namespace

MatN VariationalBundle::y_at(double s) const {
  int nn = dim;
  StateVec y = joint_state_at(base, s);
  MatN out(nn, nn);
  for (int c = 0; c < nn; ++c) out.col(c) = y.segment(2 * nn + c * nn, nn);
  return out;
}

MatN VariationalBundle::z_at(double s) const {
  int nn = dim;
  StateVec y = joint_state_at(base, s);
  MatN out(nn, nn);
  for (int c = 0; c < nn; ++c) out.col(c) = y.segment(2 * nn + nn * nn + c * nn, nn);
  return out;
}

VariationalBundle variational_bundle(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                                     double tau_bar, const ShootOptions& opt_in) {
  validate(par, bg);
  if (bg.kind == BackgroundKind::cigar)
    throw std::invalid_argument(
        "variational_bundle: model lacks parallel Ricci curvature; use the fd bundle");
  MetricJet probe = sample_jet(bg, par.p0, 0.0);
  if (!probe.riemann || !probe.hess_R)
    throw std::invalid_argument("variational_bundle: jet lacks riemann/hess_R");

  SystemCoefs co{par.p};
  int nn = bg.n;
  double s_bar = std::pow(tau_bar, 1.0 - par.p);

  auto rhs = [&](double s, const StateVec& y) -> StateVec {
    VecN x = y.segment(0, nn), u = y.segment(nn, nn);
    MetricJet j = sample_jet(bg, x, co.tau_of(s));
    double c1 = co.c1_of(s), c2 = co.c2_of(s);
    StateVec f(2 * nn + 2 * nn * nn);
    f.segment(0, nn) = u;
    f.segment(nn, nn) = force_term(j, co, s, u);
    for (int c = 0; c < nn; ++c) {
      VecN yc = y.segment(2 * nn + c * nn, nn);
      VecN zc = y.segment(2 * nn + nn * nn + c * nn, nn);
      // coordinate form of nabla_s Y = Z and
      // nabla_s Z = -R(Y,u)u + c1 g^{-1} Hess(R) Y - c2 g^{-1} Ric Z
      VecN ydot = zc - j.christoffel.contract(u, yc);
      VecN zcov = -j.riemann->apply(yc, u, u);
      if (c1 != 0.0) zcov += c1 * (j.g_inv * ((*j.hess_R) * yc));
      if (c2 != 0.0) zcov -= c2 * (j.g_inv * (j.ric * zc));
      VecN zdot = zcov - j.christoffel.contract(u, zc);
      f.segment(2 * nn + c * nn, nn) = ydot;
      f.segment(2 * nn + nn * nn + c * nn, nn) = zdot;
    }
    return f;
  };

  ShootOptions opt = opt_in;
  opt.allow_rotation = false;

  MetricJet j0 = sample_jet(bg, par.p0, 0.0);
  VecN u0 = v / (1.0 - par.p);
  double w0 = inner(j0.g, u0, u0);
  double k1_run = curvature_magnitude(j0);
  double a1 = std::max(1.0 / ((1.0 - par.p) * (1.0 - par.p)), 2.0 / (1.0 - par.p));

  auto after = [&](const OdeStep& st) -> EventAction {
    VecN x = st.y1.segment(0, nn), u = st.y1.segment(nn, nn);
    double tau = co.tau_of(st.s1);
    MetricJet j = sample_jet(bg, x, tau);
    if (bg.kind == BackgroundKind::sphere && x.norm() > M_PI - 0.1)
      throw std::runtime_error("variational_bundle: curve crossed the chart guard");
    k1_run = std::max(k1_run, curvature_magnitude(j));
    double c1c = a1 * k1_run, c2c = 2.0 * (1.0 - par.p) * c1c, c3c = c2c / (8.0 * (1.0 + 2.0 * par.p));
    double env = std::exp(c2c * tau) *
                 (w0 + c3c * std::pow(st.s1, (1.0 + 2.0 * par.p) / (1.0 - par.p)));
    if (inner(j.g, u, u) > opt.envelope_factor * (env + 1e-300))
      throw std::runtime_error("variational_bundle: speed left the admissible envelope");
    return EventAction::proceed();
  };

  StateVec y0 = StateVec::Zero(2 * nn + 2 * nn * nn);
  y0.segment(0, nn) = par.p0;
  y0.segment(nn, nn) = u0;
  for (int c = 0; c < nn; ++c) y0[2 * nn + nn * nn + c * nn + c] = 1.0 / (1.0 - par.p);

  OdeOptions oo;
  oo.rtol = opt.rtol;
  oo.atol = opt.atol;
  oo.max_step = s_bar * opt.max_step_frac;

  OdeResult res = integrate_ode(rhs, y0, 0.0, s_bar, oo, after);
  if (res.status != OdeStatus::ok)
    throw std::runtime_error("variational_bundle: integration failed (" + res.message + ")");

  VariationalBundle vb;
  vb.dim = nn;
  vb.base.bg = bg;
  vb.base.par = par;
  vb.base.v = v;
  vb.base.tau_bar = tau_bar;
  vb.base.s_bar = s_bar;
  if (bg.kind == BackgroundKind::sphere) vb.base.charts.push_back(identity_frame(nn));
  for (auto& st : res.steps) {
    CurveStep cs;
    cs.ode = std::move(st);
    cs.chart = 0;
    vb.base.steps.push_back(std::move(cs));
  }
  return vb;
}

double jacobi_residual(const VariationalBundle& vb, int column) {
  int nn = vb.dim;
  if (column < 0 || column >= nn) throw std::invalid_argument("jacobi_residual: bad column");
  SystemCoefs co{vb.base.par.p};
  double worst = 0.0;
  auto check = [&](const StateVec& y, const StateVec& f, double s) {
    VecN x = y.segment(0, nn), u = y.segment(nn, nn);
    VecN yc = y.segment(2 * nn + column * nn, nn);
    VecN zc = y.segment(2 * nn + nn * nn + column * nn, nn);
    VecN fz = f.segment(2 * nn + nn * nn + column * nn, nn);
    MetricJet j = sample_jet(vb.base.bg, x, co.tau_of(s));
    double c1 = co.c1_of(s), c2 = co.c2_of(s);
    VecN zcov = -j.riemann->apply(yc, u, u);
    if (c1 != 0.0) zcov += c1 * (j.g_inv * ((*j.hess_R) * yc));
    if (c2 != 0.0) zcov -= c2 * (j.g_inv * (j.ric * zc));
    VecN r = fz + j.christoffel.contract(u, zc) - zcov;
    worst = std::max(worst, norm_g(j.g, r));
  };
  check(vb.base.steps.front().ode.y0, vb.base.steps.front().ode.f0, vb.base.steps.front().ode.s0);
  for (const auto& st : vb.base.steps) check(st.ode.y1, st.ode.f1, st.ode.s1);
  return worst;
}

double jacobi_residual(const GeodesicCurve& curve, const std::vector<VecN>& y_nodes) {
  auto ss = curve.node_s();
  auto states = curve.node_states();
  if (y_nodes.size() != ss.size())
    throw std::invalid_argument("jacobi_residual: field must be given at every node");
  SystemCoefs co{curve.par.p};
  size_t m = ss.size();
  // first covariant derivative at interior nodes
  std::vector<VecN> a(m, VecN::Zero(curve.bg.n));
  std::vector<MetricJet> jets(m);
  for (size_t i = 0; i < m; ++i) jets[i] = sample_jet(curve.bg, states[i].x, co.tau_of(ss[i]));
  for (size_t i = 1; i + 1 < m; ++i)
    a[i] = (y_nodes[i + 1] - y_nodes[i - 1]) / (ss[i + 1] - ss[i - 1]) +
           jets[i].christoffel.contract(states[i].u, y_nodes[i]);
  double worst = 0.0;
  for (size_t i = 2; i + 2 < m; ++i) {
    VecN b = (a[i + 1] - a[i - 1]) / (ss[i + 1] - ss[i - 1]) +
             jets[i].christoffel.contract(states[i].u, a[i]);
    const MetricJet& j = jets[i];
    if (!j.riemann || !j.hess_R)
      throw std::invalid_argument("jacobi_residual: jet lacks riemann/hess_R");
    double c1 = co.c1_of(ss[i]), c2 = co.c2_of(ss[i]);
    VecN r = b + j.riemann->apply(y_nodes[i], states[i].u, states[i].u) -
             c1 * (j.g_inv * ((*j.hess_R) * y_nodes[i])) + c2 * (j.g_inv * (j.ric * a[i]));
    worst = std::max(worst, norm_g(j.g, r));
  }
  return worst;
}

namespace {

std::vector<JacobianRecord> jacobian_records(const BackgroundId& bg, const FlowParams& par,
                                             const VecN& v, const std::vector<double>& taus,
                                             JacobianMode mode, const JacobianOptions& opt) {
  if (taus.empty()) throw std::invalid_argument("exp_jacobian: empty tau grid");
  for (size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) throw std::invalid_argument("exp_jacobian: tau must be positive");
    if (i > 0 && !(taus[i] > taus[i - 1]))
      throw std::invalid_argument("exp_jacobian: tau grid must ascend");
  }
  double tau_top = taus.back();

  std::function<MatN(double)> matrix_at;
  const GeodesicCurve* basep = nullptr;
  FdBundle fdb;
  VariationalBundle vb;
  if (mode == JacobianMode::fd_bundle) {
    fdb = make_fd_bundle(bg, par, v, tau_top, opt);
    basep = &fdb.base;
    matrix_at = [&fdb](double s) { return fdb.matrix_at(s); };
  } else {
    vb = variational_bundle(bg, par, v, tau_top, opt.shoot);
    basep = &vb.base;
    matrix_at = [&vb](double s) { return vb.y_at(s); };
  }
  const GeodesicCurve& base = *basep;

  std::vector<double> s_hits;
  if (opt.scan) {
    auto det_at = [&](double s) { return matrix_at(s).determinant(); };
    DetProbe probe;
    s_hits = probe.scan(det_at, dense_s_grid(base, opt.dense_per_step), opt.det_floor);
  }

  std::vector<JacobianRecord> out;
  out.reserve(taus.size());
  for (double tau : taus) {
    double s = std::pow(tau, 1.0 - par.p);
    JacobianRecord rec;
    rec.tau = tau;
    rec.matrix = matrix_at(s);
    rec.jp = jp_from_matrix(base, s, rec.matrix);
    for (double sh : s_hits)
      if (sh < s) rec.conjugate_times.push_back(std::pow(sh, 1.0 / (1.0 - par.p)));
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

JacobianRecord exp_jacobian(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                            double tau_bar, JacobianMode mode, const JacobianOptions& opt) {
  return jacobian_records(bg, par, v, {tau_bar}, mode, opt).front();
}

std::vector<JacobianRecord> exp_jacobian_grid(const BackgroundId& bg, const FlowParams& par,
                                              const VecN& v, const std::vector<double>& taus,
                                              JacobianMode mode, const JacobianOptions& opt) {
  return jacobian_records(bg, par, v, taus, mode, opt);
}

}  // namespace lplab
