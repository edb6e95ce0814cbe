#include "lplab/background.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lplab {

namespace {

// --- radial profile of the sphere chart -------------------------------------
//
// Metric in the angle chart: g = c(tau) [ h(r)^2 (I - uu^T) + uu^T ],
// h(r) = sin(r)/r, u = x/r. The Christoffel symbols reduce to three radial
// coefficients:
//   Gamma^m_ij = P (u_i d_mj + u_j d_mi) + Q u_i u_j u_m + S d_ij u_m,
//   P = cot r - 1/r,  S = (r - sin r cos r)/r^2,  Q = -(2P + S).
// Q's identity encodes that radial rays are geodesics. Near r = 0 the closed
// forms cancel catastrophically, so short Taylor series take over.

double h_of(double r) {
  if (r < 1e-8) {
    double r2 = r * r;
    return 1.0 - r2 / 6.0 + r2 * r2 / 120.0;
  }
  return std::sin(r) / r;
}

double p_of(double r) {
  if (r < 0.1) {
    double r2 = r * r;
    return r * (-1.0 / 3.0 + r2 * (-1.0 / 45.0 + r2 * (-2.0 / 945.0 - r2 / 4725.0)));
  }
  return std::cos(r) / std::sin(r) - 1.0 / r;
}

double s_of(double r) {
  if (r < 0.1) {
    double r2 = r * r;
    return r * (2.0 / 3.0 + r2 * (-2.0 / 15.0 + r2 * (4.0 / 315.0 - 2.0 * r2 / 2835.0)));
  }
  return (r - std::sin(r) * std::cos(r)) / (r * r);
}

// 1 - h^2 in the cancellation-free product form.
double b_of(double r) {
  double rms;
  if (r < 0.1) {
    double r2 = r * r;
    rms = r * r2 * (1.0 / 6.0 + r2 * (-1.0 / 120.0 + r2 / 5040.0));
  } else {
    rms = r - std::sin(r);
  }
  return rms * (r + std::sin(r)) / (r * r);
}

void require_dim(const BackgroundId& bg, const VecN& x, const char* who) {
  if (x.size() != bg.n) {
    std::ostringstream os;
    os << who << ": point has dimension " << x.size() << ", background needs " << bg.n;
    throw std::invalid_argument(os.str());
  }
}

MetricJet flat_jet(const BackgroundId& bg, const VecN& x, double tau) {
  MetricJet j;
  j.n = bg.n;
  j.tau = tau;
  j.g = MatN::Identity(bg.n, bg.n);
  j.g_inv = MatN::Identity(bg.n, bg.n);
  j.christoffel.set_zero(bg.n);
  j.ric = MatN::Zero(bg.n, bg.n);
  j.scalar_R = 0.0;
  j.grad_R = VecN::Zero(bg.n);
  j.dR_dtau = 0.0;
  j.ric_dtau = MatN::Zero(bg.n, bg.n);
  Ten4 rm;
  rm.set_zero(bg.n);
  j.riemann = rm;
  j.hess_R = MatN::Zero(bg.n, bg.n);
  (void)x;
  return j;
}

MetricJet sphere_jet(const BackgroundId& bg, const VecN& x, double tau) {
  int n = bg.n;
  double c = 2.0 * (n - 1) * (tau + bg.a);
  if (!(c > 0.0)) throw std::domain_error("sphere_jet: metric extinct at this tau");
  double r = x.norm();
  if (r >= M_PI) throw std::domain_error("sphere_jet: chart point beyond the antipodal radius");

  MetricJet j;
  j.n = n;
  j.tau = tau;

  MatN id = MatN::Identity(n, n);
  if (r < 1e-14) {
    j.g = c * id;
    j.g_inv = id / c;
    j.christoffel.set_zero(n);
    j.ric = (n - 1) * id;
  } else {
    VecN u = x / r;
    MatN uu = u * u.transpose();
    double h = h_of(r), h2 = h * h, b = b_of(r);
    MatN ground = h2 * id + b * uu;  // unit-sphere metric in this chart
    j.g = c * ground;
    j.g_inv = ((id - uu) / h2 + uu) / c;
    double pp = p_of(r), ss = s_of(r), qq = -(2.0 * pp + ss);
    j.christoffel.set_zero(n);
    for (int m = 0; m < n; ++m)
      for (int i = 0; i < n; ++i)
        for (int jx = 0; jx < n; ++jx) {
          double v = pp * (u[i] * (m == jx ? 1.0 : 0.0) + u[jx] * (m == i ? 1.0 : 0.0)) +
                     qq * u[i] * u[jx] * u[m] + ss * (i == jx ? 1.0 : 0.0) * u[m];
          j.christoffel.at(m, i, jx) = v;
        }
    j.ric = (n - 1) * ground;
  }

  j.scalar_R = n / (2.0 * (tau + bg.a));
  j.grad_R = VecN::Zero(n);
  j.dR_dtau = -n / (2.0 * (tau + bg.a) * (tau + bg.a));
  j.ric_dtau = MatN::Zero(n, n);
  j.hess_R = MatN::Zero(n, n);

  // Constant sectional curvature 1/c: R(u,v)w = (\<v,w\> u - \<u,w\> v)/c.
  Ten4 rm;
  rm.set_zero(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int jx = 0; jx < n; ++jx)
        for (int k = 0; k < n; ++k)
          rm.at(l, i, jx, k) = (j.g(jx, k) * (l == i ? 1.0 : 0.0) - j.g(i, k) * (l == jx ? 1.0 : 0.0)) / c;
  j.riemann = rm;
  return j;
}

MetricJet cigar_jet(const BackgroundId& bg, const VecN& x, double tau) {
  int n = 2;
  double f = std::exp(4.0 * (bg.t0 - tau));
  double r2 = x.squaredNorm();
  double w = f + r2;

  MetricJet j;
  j.n = n;
  j.tau = tau;
  MatN id = MatN::Identity(n, n);
  j.g = id / w;
  j.g_inv = w * id;

  // Conformal metric e^{2phi} delta with phi = -log(w)/2; dphi_i = -x_i/w.
  VecN dphi = -x / w;
  j.christoffel.set_zero(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int jx = 0; jx < n; ++jx)
        j.christoffel.at(k, i, jx) = (k == i ? 1.0 : 0.0) * dphi[jx] + (k == jx ? 1.0 : 0.0) * dphi[i] -
                                     (i == jx ? 1.0 : 0.0) * dphi[k];

  j.scalar_R = 4.0 * f / w;
  j.ric = (2.0 * f / (w * w)) * id;  // = (R/2) g
  j.grad_R = -8.0 * f / (w * w) * x;
  j.dR_dtau = -16.0 * f * r2 / (w * w);
  j.ric_dtau = (8.0 * f * (f - r2) / (w * w * w)) * id;

  MatN hess(n, n);
  for (int i = 0; i < n; ++i)
    for (int jx = 0; jx < n; ++jx) {
      double dd = -8.0 * f * ((i == jx ? 1.0 : 0.0) * w - 4.0 * x[i] * x[jx]) / (w * w * w);
      double gamma_term = 0.0;
      for (int k = 0; k < n; ++k) gamma_term += j.christoffel.at(k, i, jx) * j.grad_R[k];
      hess(i, jx) = dd - gamma_term;
    }
  j.hess_R = hess;

  // Gauss curvature K = R/2 on a surface: R(u,v)w = K(\<v,w\> u - \<u,w\> v).
  double kg = j.scalar_R / 2.0;
  Ten4 rm;
  rm.set_zero(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int jx = 0; jx < n; ++jx)
        for (int k = 0; k < n; ++k)
          rm.at(l, i, jx, k) = kg * (j.g(jx, k) * (l == i ? 1.0 : 0.0) - j.g(i, k) * (l == jx ? 1.0 : 0.0));
  j.riemann = rm;
  return j;
}

// jet of g(lambda tau)/lambda from the jet of g at lambda tau
void apply_scale(MetricJet& j, double lambda, double tau_out) {
  j.tau = tau_out;
  j.g /= lambda;
  j.g_inv *= lambda;
  j.scalar_R *= lambda;
  j.grad_R *= lambda;
  j.dR_dtau *= lambda * lambda;
  if (j.ric_dtau) *j.ric_dtau *= lambda;
  if (j.hess_R) *j.hess_R *= lambda;
  // christoffel, ric, riemann (1,3) are scale invariant
}

}  // namespace

std::string BackgroundId::describe() const {
  std::ostringstream os;
  switch (kind) {
    case BackgroundKind::flat:
      os << "flat(n=" << n << ")";
      break;
    case BackgroundKind::sphere:
      os << "sphere(n=" << n << ",a=" << a << ")";
      break;
    case BackgroundKind::cigar:
      os << "cigar(t0=" << t0 << ")";
      break;
  }
  if (scale != 1.0) os << "/scale=" << scale;
  return os.str();
}

BackgroundId make_flat(int n) {
  if (n < 1 || n > 3) throw std::invalid_argument("flat: dimension must be 1..3");
  BackgroundId bg;
  bg.kind = BackgroundKind::flat;
  bg.n = n;
  return bg;
}

BackgroundId make_sphere(int n, double a) {
  if (n < 2 || n > 3) throw std::invalid_argument("sphere: dimension must be 2 or 3");
  if (!(a > 0.0)) throw std::invalid_argument("sphere: extinction parameter a must be positive");
  BackgroundId bg;
  bg.kind = BackgroundKind::sphere;
  bg.n = n;
  bg.a = a;
  return bg;
}

BackgroundId make_cigar(double t0) {
  BackgroundId bg;
  bg.kind = BackgroundKind::cigar;
  bg.n = 2;
  bg.t0 = t0;
  return bg;
}

BackgroundId rescale(const BackgroundId& bg, double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("rescale: factor must be positive");
  BackgroundId out = bg;
  if (bg.kind == BackgroundKind::sphere) {
    out.a = bg.a / lambda;  // 2(n-1)(lambda tau + a)/lambda = 2(n-1)(tau + a/lambda)
  } else {
    out.scale = bg.scale * lambda;
  }
  return out;
}

MetricJet sample_jet(const BackgroundId& bg, const VecN& x, double tau) {
  require_dim(bg, x, "sample_jet");
  if (!(tau >= 0.0)) throw std::domain_error("sample_jet: tau must be >= 0");
  switch (bg.kind) {
    case BackgroundKind::flat: {
      MetricJet j = flat_jet(bg, x, bg.scale * tau);
      if (bg.scale != 1.0) apply_scale(j, bg.scale, tau);
      j.tau = tau;
      return j;
    }
    case BackgroundKind::sphere:
      return sphere_jet(bg, x, tau);  // rescale folded into a
    case BackgroundKind::cigar: {
      MetricJet j = cigar_jet(bg, x, bg.scale * tau);
      if (bg.scale != 1.0) apply_scale(j, bg.scale, tau);
      j.tau = tau;
      return j;
    }
  }
  throw std::logic_error("sample_jet: unknown background kind");
}

double flow_consistency_check(const BackgroundId& bg, const VecN& x, double tau, double h) {
  require_dim(bg, x, "flow_consistency_check");
  if (!(h > 0.0)) throw std::invalid_argument("flow_consistency_check: step must be positive");
  MetricJet j0 = sample_jet(bg, x, tau);
  int n = bg.n;
  double worst = 0.0;
  auto upd = [&worst](double v) { worst = std::max(worst, std::abs(v)); };

  // time derivatives; centered when tau - h stays valid, else one-sided 2nd order
  MetricJet ja, jb;
  double denom;
  bool centered = tau - h >= 0.0;
  if (centered) {
    ja = sample_jet(bg, x, tau + h);
    jb = sample_jet(bg, x, tau - h);
    denom = 2.0 * h;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) upd((ja.g(i, k) - jb.g(i, k)) / denom - 2.0 * j0.ric(i, k));
    upd((ja.scalar_R - jb.scalar_R) / denom - j0.dR_dtau);
    if (j0.ric_dtau)
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) upd((ja.ric(i, k) - jb.ric(i, k)) / denom - (*j0.ric_dtau)(i, k));
  } else {
    ja = sample_jet(bg, x, tau + h);
    jb = sample_jet(bg, x, tau + 2.0 * h);
    denom = 2.0 * h;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        upd((-3.0 * j0.g(i, k) + 4.0 * ja.g(i, k) - jb.g(i, k)) / denom - 2.0 * j0.ric(i, k));
    upd((-3.0 * j0.scalar_R + 4.0 * ja.scalar_R - jb.scalar_R) / denom - j0.dR_dtau);
  }

  // spatial: scalar gradient
  std::array<MetricJet, 2 * kMaxDim> shifts;
  for (int i = 0; i < n; ++i) {
    VecN xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    shifts[2 * i] = sample_jet(bg, xp, tau);
    shifts[2 * i + 1] = sample_jet(bg, xm, tau);
    upd((shifts[2 * i].scalar_R - shifts[2 * i + 1].scalar_R) / (2.0 * h) - j0.grad_R[i]);
  }

  // Christoffel from FD of the metric
  for (int m = 0; m < n; ++m)
    for (int i = 0; i < n; ++i)
      for (int jx = 0; jx < n; ++jx) {
        double v = 0.0;
        for (int l = 0; l < n; ++l) {
          double dgi = (shifts[2 * i].g(l, jx) - shifts[2 * i + 1].g(l, jx)) / (2.0 * h);
          double dgj = (shifts[2 * jx].g(l, i) - shifts[2 * jx + 1].g(l, i)) / (2.0 * h);
          double dgl = (shifts[2 * l].g(i, jx) - shifts[2 * l + 1].g(i, jx)) / (2.0 * h);
          v += 0.5 * j0.g_inv(m, l) * (dgi + dgj - dgl);
        }
        upd(v - j0.christoffel.at(m, i, jx));
      }

  // Hessian of R when the jet carries it
  if (j0.hess_R) {
    for (int i = 0; i < n; ++i)
      for (int jx = 0; jx < n; ++jx) {
        double dd;
        if (i == jx) {
          dd = (shifts[2 * i].scalar_R - 2.0 * j0.scalar_R + shifts[2 * i + 1].scalar_R) / (h * h);
        } else {
          VecN xpp = x, xpm = x, xmp = x, xmm = x;
          xpp[i] += h;
          xpp[jx] += h;
          xpm[i] += h;
          xpm[jx] -= h;
          xmp[i] -= h;
          xmp[jx] += h;
          xmm[i] -= h;
          xmm[jx] -= h;
          dd = (sample_jet(bg, xpp, tau).scalar_R - sample_jet(bg, xpm, tau).scalar_R -
                sample_jet(bg, xmp, tau).scalar_R + sample_jet(bg, xmm, tau).scalar_R) /
               (4.0 * h * h);
        }
        double gamma_term = 0.0;
        for (int k = 0; k < n; ++k) gamma_term += j0.christoffel.at(k, i, jx) * j0.grad_R[k];
        upd(dd - gamma_term - (*j0.hess_R)(i, jx));
      }
  }

  return worst;
}

CurvatureBounds curvature_bounds(const BackgroundId& bg) {
  CurvatureBounds cb;
  switch (bg.kind) {
    case BackgroundKind::flat:
      break;
    case BackgroundKind::sphere:
      cb.c1 = 0.0;
      cb.c2 = 1.0 / (2.0 * bg.a);
      cb.r_sup = bg.n / (2.0 * bg.a);
      cb.k1_sup = (bg.n + 1.0) / (2.0 * bg.a);
      break;
    case BackgroundKind::cigar: {
      // R = 4F/(F+r^2) peaks at 4 at the tip for every tau; |Ric|_op = R/2;
      // |grad R|_g^2 = 64 F^2 r^2/(F+r^2)^3 peaks at r^2 = F/2 with value 256/27.
      double lam = bg.scale;
      cb.c1 = 0.0;
      cb.c2 = 2.0 * lam;
      cb.r_sup = 4.0 * lam;
      cb.k1_sup = 4.0 * lam + 2.0 * lam + std::pow(lam, 1.5) * 16.0 / (3.0 * std::sqrt(3.0));
      break;
    }
  }
  return cb;
}

// --- sphere atlas ------------------------------------------------------------

MatE identity_frame(int n) { return MatE::Identity(n + 1, n + 1); }

VecE chart_to_ambient(const MatE& q, const VecN& x) {
  int n = x.size();
  double r = x.norm();
  VecE hat(n + 1);
  hat[0] = std::cos(r);
  double h = h_of(r);
  for (int i = 0; i < n; ++i) hat[i + 1] = h * x[i];
  return q.transpose() * hat;
}

VecN ambient_to_chart(const MatE& q, const VecE& y) {
  VecE hat = q * y;
  int n = y.size() - 1;
  double c = std::min(1.0, std::max(-1.0, hat[0]));
  double rho = hat.tail(n).norm();
  double r = std::atan2(rho, c);
  if (r > M_PI - 1e-9) throw std::domain_error("ambient_to_chart: point at the chart's antipode");
  VecN x(n);
  if (rho < 1e-300) {
    x.setZero();
  } else {
    for (int i = 0; i < n; ++i) x[i] = r * hat[i + 1] / rho;
  }
  return x;
}

VecE chart_velocity_to_ambient(const MatE& q, const VecN& x, const VecN& xdot) {
  int n = x.size();
  double r = x.norm();
  double h = h_of(r);
  VecE hatdot(n + 1);
  if (r < 1e-14) {
    hatdot[0] = 0.0;
    for (int i = 0; i < n; ++i) hatdot[i + 1] = xdot[i];
  } else {
    VecN u = x / r;
    double rdot = u.dot(xdot);
    hatdot[0] = -std::sin(r) * rdot;
    for (int i = 0; i < n; ++i) hatdot[i + 1] = (std::cos(r) - h) * rdot * u[i] + h * xdot[i];
  }
  return q.transpose() * hatdot;
}

VecN ambient_velocity_to_chart(const MatE& q, const VecN& x, const VecE& ydot) {
  VecE hatdot = q * ydot;
  int n = x.size();
  double r = x.norm();
  VecN out(n);
  if (r < 1e-14) {
    for (int i = 0; i < n; ++i) out[i] = hatdot[i + 1];
    return out;
  }
  VecN u = x / r;
  double h = h_of(r);
  VecN w(n);
  for (int i = 0; i < n; ++i) w[i] = hatdot[i + 1];
  // exact inversion of the pushforward: rdot = cos(r)\<w,u\> - sin(r) hatdot_0
  double rdot = std::cos(r) * w.dot(u) - std::sin(r) * hatdot[0];
  for (int i = 0; i < n; ++i) out[i] = (w[i] - (std::cos(r) - h) * rdot * u[i]) / h;
  return out;
}

MatE recenter_frame(const MatE& q, const VecN& x) {
  int n = x.size();
  VecE pole = chart_to_ambient(q, x);
  MatE out(n + 1, n + 1);
  out.row(0) = pole.transpose();
  int filled = 1;
  // deterministic completion: old tangent rows first, old pole as fallback
  for (int cand = 1; cand <= n + 1 && filled <= n; ++cand) {
    VecE v = q.row(cand % (n + 1)).transpose();
    for (int k = 0; k < filled; ++k) v -= out.row(k).dot(v) * out.row(k).transpose();
    double nv = v.norm();
    if (nv > 1e-8) {
      out.row(filled) = v.transpose() / nv;
      ++filled;
    }
  }
  if (filled != n + 1) throw std::runtime_error("recenter_frame: degenerate completion");
  // chart transitions must preserve orientation, or determinant tracking
  // across a rotation flips sign; the atlas starts at det +1
  if (out.determinant() < 0.0) out.row(n) *= -1.0;
  return out;
}

VecN chart_point_to(const MatE& from, const VecN& x, const MatE& to) {
  return ambient_to_chart(to, chart_to_ambient(from, x));
}

VecN chart_velocity_to(const MatE& from, const VecN& x, const VecN& xdot, const MatE& to) {
  VecE y = chart_to_ambient(from, x);
  VecE yd = chart_velocity_to_ambient(from, x, xdot);
  return ambient_velocity_to_chart(to, ambient_to_chart(to, y), yd);
}

double sphere_angle(const VecN& x, const VecN& y) {
  int n = x.size();
  MatE id = identity_frame(n);
  VecE ax = chart_to_ambient(id, x);
  VecE ay = chart_to_ambient(id, y);
  double dot = ax.dot(ay);
  if (dot >= 0.0) return 2.0 * std::asin(std::min(1.0, (ax - ay).norm() / 2.0));
  return M_PI - 2.0 * std::asin(std::min(1.0, (ax + ay).norm() / 2.0));
}

// --- flow parameters ---------------------------------------------------------

FlowParams make_flow_params(const BackgroundId& bg, double p, double tau_max) {
  FlowParams par;
  par.p = p;
  par.tau_max = tau_max;
  par.p0 = VecN::Zero(bg.n);
  switch (bg.kind) {
    case BackgroundKind::flat:
      par.t0 = 0.0;
      break;
    case BackgroundKind::sphere:
      par.t0 = -bg.a;
      break;
    case BackgroundKind::cigar:
      par.t0 = bg.t0;
      break;
  }
  validate(par, bg);
  return par;
}

void validate(const FlowParams& par, const BackgroundId& bg) {
  if (!(par.p > 0.0 && par.p < 1.0)) throw std::invalid_argument("flow params: p must lie in (0,1)");
  if (!(par.tau_max > 0.0)) throw std::invalid_argument("flow params: tau_max must be positive");
  if (par.p0.size() != bg.n) throw std::invalid_argument("flow params: basepoint dimension mismatch");
  if (bg.kind == BackgroundKind::sphere && par.p0.norm() >= M_PI)
    throw std::invalid_argument("flow params: sphere basepoint outside the angle chart");
}

double window_cap(const FlowParams& par) { return par.t0 > 0.0 ? std::min(par.t0, par.tau_max) : par.tau_max; }

// --- distance in g(0) --------------------------------------------------------

namespace {

// Fixed-metric geodesic shooting on the cigar slice tau = 0. The flow map of
// x'' = -Gamma(x)(x', x') over unit time, integrated with classic RK4.
VecN cigar_flow_endpoint(const BackgroundId& bg, const VecN& x0, const VecN& v0, int steps) {
  VecN x = x0, v = v0;
  double dt = 1.0 / steps;
  auto acc = [&bg](const VecN& xx, const VecN& vv) -> VecN {
    MetricJet j = sample_jet(bg, xx, 0.0);
    return -j.christoffel.contract(vv, vv);
  };
  for (int i = 0; i < steps; ++i) {
    VecN k1x = v, k1v = acc(x, v);
    VecN k2x = v + 0.5 * dt * k1v, k2v = acc(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v);
    VecN k3x = v + 0.5 * dt * k2v, k3v = acc(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v);
    VecN k4x = v + dt * k3v, k4v = acc(x + dt * k3x, v + dt * k3v);
    x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  return x;
}

double cigar_distance(const BackgroundId& bg, const VecN& x, const VecN& y) {
  // radial geodesics from the tip: d(0,q) = asinh(|q|/sqrt(F(0))), rescale
  // divides lengths at tau = 0 by sqrt(lambda)
  double f0 = std::exp(4.0 * bg.t0);
  double lam_adj = 1.0 / std::sqrt(bg.scale);
  auto from_tip = [&](const VecN& q) { return std::asinh(q.norm() / std::sqrt(f0)); };
  if (x.norm() < 1e-14) return from_tip(y) * lam_adj;
  if (y.norm() < 1e-14) return from_tip(x) * lam_adj;

  // generic endpoints: Newton on the initial velocity of a unit-time geodesic
  const int steps = 400;
  VecN v = y - x;
  for (int it = 0; it < 40; ++it) {
    VecN fe = cigar_flow_endpoint(bg, x, v, steps) - y;
    if (fe.norm() < 1e-12) break;
    MatN jac(2, 2);
    double hstep = 1e-6 * std::max(1.0, v.norm());
    for (int c = 0; c < 2; ++c) {
      VecN vp = v, vm = v;
      vp[c] += hstep;
      vm[c] -= hstep;
      jac.col(c) = (cigar_flow_endpoint(bg, x, vp, steps) - cigar_flow_endpoint(bg, x, vm, steps)) / (2.0 * hstep);
    }
    v -= jac.fullPivLu().solve(fe);
  }
  VecN fe = cigar_flow_endpoint(bg, x, v, steps) - y;
  if (fe.norm() > 1e-8)
    throw std::runtime_error("distance_g0: cigar geodesic shooting did not converge");
  MetricJet j = sample_jet(bg, x, 0.0);
  return norm_g(j.g, v);
}

}  // namespace

double distance_g0(const BackgroundId& bg, const VecN& x, const VecN& y) {
  require_dim(bg, x, "distance_g0");
  require_dim(bg, y, "distance_g0");
  switch (bg.kind) {
    case BackgroundKind::flat:
      return (x - y).norm() / std::sqrt(bg.scale);
    case BackgroundKind::sphere:
      return std::sqrt(2.0 * (bg.n - 1) * bg.a) * sphere_angle(x, y);
    case BackgroundKind::cigar:
      return cigar_distance(bg, x, y);
  }
  throw std::logic_error("distance_g0: unknown background kind");
}

}  // namespace lplab
