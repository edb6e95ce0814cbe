#include "lplab/action.hpp"

#include "lplab/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace lplab {

namespace {

constexpr int kStepGl = 8;

// per-step GL over the dense output, truncated at s_hi
template <class F>
double integrate_curve(const GeodesicCurve& c, double s_hi, F&& f) {
  const GlRule& rule = gl_rule(kStepGl);
  double acc = 0.0;
  for (const auto& st : c.steps) {
    double a = st.ode.s0, b = std::min(st.ode.s1, s_hi);
    if (b <= a) break;
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < kStepGl; ++i) {
      double s = mid + half * rule.nodes[i];
      StateVec y, dy;
      hermite_eval(st.ode, s, &y, &dy);
      int nn = c.bg.n;
      acc += rule.weights[i] * half * f(s, VecN(y.segment(0, nn)), VecN(y.segment(nn, nn)),
                                        VecN(dy.segment(nn, nn)));
    }
  }
  return acc;
}

double weight_pow(double s, double expo) { return s > 0.0 ? std::pow(s, expo) : (expo == 0.0 ? 1.0 : 0.0); }

}  // namespace

ActionValue lp_length_partial(const GeodesicCurve& curve, double tau_hi) {
  double p = curve.p();
  if (!(tau_hi > 0.0) || tau_hi > curve.tau_bar * (1.0 + 1e-12))
    throw std::invalid_argument("lp_length_partial: tau_hi outside the curve range");
  double s_hi = std::pow(tau_hi, 1.0 - p);
  double curv_expo = 2.0 * p / (1.0 - p);

  double curv = integrate_curve(curve, s_hi, [&](double s, const VecN& x, const VecN&, const VecN&) {
    MetricJet j = sample_jet(curve.bg, x, curve.tau_of_s(s));
    return weight_pow(s, curv_expo) * j.scalar_R / (1.0 - p);
  });
  double kin = integrate_curve(curve, s_hi, [&](double s, const VecN& x, const VecN& u, const VecN&) {
    MetricJet j = sample_jet(curve.bg, x, curve.tau_of_s(s));
    return (1.0 - p) * inner(j.g, u, u);
  });

  ActionValue av;
  av.curvature_part = curv;
  av.kinetic_part = kin;
  av.L_p = curv + kin;
  av.l_p = (1.0 - p) * av.L_p / std::pow(tau_hi, 1.0 - p);
  return av;
}

ActionValue lp_length(const GeodesicCurve& curve) { return lp_length_partial(curve, curve.tau_bar); }

double curve_integral_R(const GeodesicCurve& curve, double w, double tau_hi) {
  double p = curve.p();
  double s_hi = std::pow(tau_hi, 1.0 - p);
  double expo = (w + p) / (1.0 - p);
  return integrate_curve(curve, s_hi, [&](double s, const VecN& x, const VecN&, const VecN&) {
    MetricJet j = sample_jet(curve.bg, x, curve.tau_of_s(s));
    return weight_pow(s, expo) * j.scalar_R / (1.0 - p);
  });
}

double harnack_H(const MetricJet& jet, const VecN& x_vel_tau, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("harnack_H: tau must be positive");
  double quad = x_vel_tau.dot(jet.ric * x_vel_tau);
  return -jet.dR_dtau - jet.scalar_R / tau - 2.0 * jet.grad_R.dot(x_vel_tau) + 2.0 * quad;
}

double curve_integral_H(const GeodesicCurve& curve, double w, double tau_hi) {
  double p = curve.p();
  double s_hi = std::pow(tau_hi, 1.0 - p);
  double expo = (w + p) / (1.0 - p);
  return integrate_curve(curve, s_hi, [&](double s, const VecN& x, const VecN& u, const VecN&) {
    double tau = curve.tau_of_s(s);
    MetricJet j = sample_jet(curve.bg, x, tau);
    VecN xdot = (1.0 - p) * std::pow(s, -p / (1.0 - p)) * u;
    return weight_pow(s, expo) * harnack_H(j, xdot, tau) / (1.0 - p);
  });
}

double first_variation(const GeodesicCurve& curve, const std::function<VecN(double)>& y,
                       const std::function<VecN(double)>& dy, VariationMode mode, double fd_eps) {
  double p = curve.p();
  double sb = curve.s_bar;
  if (curve.rotations > 0)
    throw std::invalid_argument("first_variation: curve rotated charts; fields are chart-bound");

  if (mode == VariationMode::fd) {
    auto action_of = [&](double eps) {
      return integrate_curve(curve, sb, [&](double s, const VecN& x, const VecN& u, const VecN&) {
        VecN xe = x + eps * y(s);
        VecN ue = u + eps * dy(s);
        MetricJet j = sample_jet(curve.bg, xe, curve.tau_of_s(s));
        return weight_pow(s, 2.0 * p / (1.0 - p)) * j.scalar_R / (1.0 - p) +
               (1.0 - p) * inner(j.g, ue, ue);
      });
    };
    return (action_of(fd_eps) - action_of(-fd_eps)) / (2.0 * fd_eps);
  }

  // formula mode: endpoint pairing plus the Euler-Lagrange integral
  CurveState end = curve.state_at(sb);
  MetricJet jend = sample_jet(curve.bg, end.x, curve.tau_bar);
  double boundary = 2.0 * (1.0 - p) * inner(jend.g, end.u, y(sb));

  double integral = integrate_curve(curve, sb, [&](double s, const VecN& x, const VecN& u, const VecN& du_dense) {
    MetricJet j = sample_jet(curve.bg, x, curve.tau_of_s(s));
    VecN ddx;
    if (curve.has_accel) {
      // solver curves satisfy the field equation; evaluating the acceleration
      // through it keeps the integrand free of interpolation noise
      double c1 = weight_pow(s, 2.0 * p / (1.0 - p)) / (2.0 * (1.0 - p) * (1.0 - p));
      double c2 = 2.0 / (1.0 - p) * weight_pow(s, p / (1.0 - p));
      ddx = -j.christoffel.contract(u, u) + c1 * (j.g_inv * j.grad_R) - c2 * (j.g_inv * (j.ric * u));
    } else {
      ddx = du_dense;
    }
    VecN accel_cov = ddx + j.christoffel.contract(u, u);
    VecN covec = weight_pow(s, 2.0 * p / (1.0 - p)) * j.grad_R -
                 2.0 * (1.0 - p) * (1.0 - p) * (j.g * accel_cov) -
                 4.0 * (1.0 - p) * weight_pow(s, p / (1.0 - p)) * (j.ric * u);
    return y(s).dot(covec) / (1.0 - p);
  });
  return boundary + integral;
}

LpBoundsValue lp_bounds(const BackgroundId& bg, const FlowParams& par, const VecN& q, double tau_bar) {
  validate(par, bg);
  if (!(tau_bar > 0.0)) throw std::invalid_argument("lp_bounds: tau_bar must be positive");
  CurvatureBounds cb = curvature_bounds(bg);
  double d0 = distance_g0(bg, par.p0, q);
  double p = par.p;
  int n = bg.n;
  LpBoundsValue out;
  out.d0 = d0;
  out.lower = -(cb.c1 * n / (p + 1.0)) * std::pow(tau_bar, p + 1.0) +
              (1.0 - p) * std::exp(-2.0 * cb.c1 * tau_bar) * d0 * d0 / std::pow(tau_bar, 1.0 - p);
  out.upper = (cb.c2 * n / (p + 1.0)) * std::pow(tau_bar, p + 1.0) +
              std::exp(2.0 * cb.c2 * tau_bar) * d0 * d0 / ((p + 1.0) * std::pow(tau_bar, 1.0 - p));
  return out;
}

DlogJCheck dlogj_inequality_check(const BackgroundId& bg, const FlowParams& par, const VecN& v,
                                  double tau, JacobianMode mode, double fd_dtau_rel) {
  if (!(tau > 0.0)) throw std::invalid_argument("dlogj_inequality_check: tau must be positive");
  double dt = fd_dtau_rel * tau;
  JacobianOptions jopt;
  auto recs = exp_jacobian_grid(bg, par, v, {tau - dt, tau, tau + dt}, mode, jopt);
  if (!recs[0].conjugate_times.empty() || recs[0].jp <= 0.0 || recs[2].jp <= 0.0)
    throw std::runtime_error("dlogj_inequality_check: conjugate point inside the window");
  DlogJCheck out;
  out.lhs = (std::log(recs[2].jp) - std::log(recs[0].jp)) / (2.0 * dt);

  GeodesicCurve curve = shoot(bg, par, v, tau);
  double p = par.p;
  int n = bg.n;
  double i_r = curve_integral_R(curve, 1.0 - p, tau);
  double i_h = curve_integral_H(curve, 2.0 - p, tau);
  out.rhs = (1.0 - p) * n / tau + (2.0 * p - 1.0) / (2.0 * std::pow(tau, 2.0 - p)) * i_r -
            i_h / (2.0 * std::pow(tau, 2.0 - p));
  out.violation = std::max(0.0, out.lhs - out.rhs);
  return out;
}

}  // namespace lplab
