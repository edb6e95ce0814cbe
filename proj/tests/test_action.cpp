#include <doctest.h>

#include <cmath>
#include <vector>

#include "lplab/action.hpp"
#include "lplab/background.hpp"
#include "lplab/geodesic.hpp"
#include "lplab/quadrature.hpp"

using namespace lplab;

TEST_CASE("flat action values are exact") {
  BackgroundId bg = make_flat(3);
  VecN v(3);
  v << 0.8, -0.3, 0.5;
  for (double p : {0.5, 0.75}) {
    FlowParams par = make_flow_params(bg, p);
    double tau_bar = 1.7;
    GeodesicCurve cur = shoot(bg, par, v, tau_bar);
    ActionValue av = lp_length(cur);
    double L_exact = v.squaredNorm() * std::pow(tau_bar, 1.0 - p) / (1.0 - p);
    CHECK(av.L_p == doctest::Approx(L_exact).epsilon(1e-10));
    CHECK(av.l_p == doctest::Approx(v.squaredNorm()).epsilon(1e-10));
    CHECK(av.curvature_part == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(av.L_p == doctest::Approx(av.curvature_part + av.kinetic_part).epsilon(1e-12));
    CHECK(av.l_p ==
          doctest::Approx((1.0 - p) * av.L_p / std::pow(tau_bar, 1.0 - p)).epsilon(1e-12));

    ActionValue full = lp_length_partial(cur, tau_bar);
    CHECK(full.L_p == doctest::Approx(av.L_p).epsilon(1e-12));
    ActionValue part = lp_length_partial(cur, 0.6);
    CHECK(part.L_p ==
          doctest::Approx(v.squaredNorm() * std::pow(0.6, 1.0 - p) / (1.0 - p)).epsilon(1e-9));
  }
}

TEST_CASE("curve integrals match independent quadrature on the sphere") {
  // scalar curvature depends only on time there, so the curve drops out of
  // the R integral, and the conserved momentum gives the speed in closed form
  int n = 2;
  double a = 1.0, p = 0.5, tau_bar = 1.4;
  BackgroundId bg = make_sphere(n, a);
  FlowParams par = make_flow_params(bg, p);
  VecN v(2);
  v << 0.7, -0.2;
  GeodesicCurve cur = shoot(bg, par, v, tau_bar);
  double c0 = 2.0 * (n - 1) * a;
  double k = c0 * v.norm();

  auto R_of = [&](double rho) { return 0.5 * n / (rho + a); };
  auto c_of = [&](double rho) { return 2.0 * (n - 1) * (rho + a); };
  for (double w : {0.5, 1.3}) {
    for (double tau_hi : {0.6, tau_bar}) {
      double expect = integrate_de(
          [&](double rho) { return std::pow(rho, w) * R_of(rho); }, 0.0, tau_hi, 1e-12);
      CHECK(curve_integral_R(cur, w, tau_hi) == doctest::Approx(expect).epsilon(1e-9));
    }
  }

  // H along the curve: -dR/dtau - R/tau + 2 R |X|^2 / n with |X|^2 = k^2 rho^{-2p}/c
  for (double w : {0.5, 1.5}) {
    double expect = integrate_de(
        [&](double rho) {
          double speed2 = k * k * std::pow(rho, -2.0 * p) / c_of(rho);
          double h = 0.5 * n / ((rho + a) * (rho + a)) - R_of(rho) / rho +
                     2.0 * R_of(rho) * speed2 / n;
          return std::pow(rho, w) * h;
        },
        0.0, tau_bar, 1e-12);
    CHECK(curve_integral_H(cur, w, tau_bar) == doctest::Approx(expect).epsilon(1e-7));
  }
}

TEST_CASE("pointwise harnack expression") {
  BackgroundId fl = make_flat(2);
  VecN x(2), X(2);
  x << 0.3, -0.7;
  X << 1.1, 0.4;
  CHECK(harnack_H(sample_jet(fl, x, 0.8), X, 0.8) == doctest::Approx(0.0).scale(1.0));

  int n = 3;
  double a = 0.8;
  BackgroundId sp = make_sphere(n, a);
  VecN y(3), Y(3);
  y << 0.4, 0.1, -0.2;
  Y << 0.6, -0.3, 0.2;
  for (double tau : {0.3, 1.2}) {
    MetricJet jet = sample_jet(sp, y, tau);
    double speed2 = Y.dot(jet.g * Y);
    double expect = -0.5 * n * a / (tau * (tau + a) * (tau + a)) + speed2 / (tau + a);
    double got = harnack_H(jet, Y, tau);
    CHECK(got == doctest::Approx(expect).epsilon(1e-12));
    // ancient flow: the expression stays above -R/tau
    CHECK(got + jet.scalar_R / tau >= 0.0);
  }
}

TEST_CASE("first variation formula agrees with a finite difference") {
  struct Setup {
    BackgroundId bg;
    double p;
  };
  std::vector<Setup> setups = {{make_flat(2), 0.5}, {make_sphere(2, 1.0), 0.6}};
  for (const auto& su : setups) {
    FlowParams par = make_flow_params(su.bg, su.p);
    VecN v(2);
    v << 0.8, 0.3;
    GeodesicCurve cur = shoot(su.bg, par, v, 1.1);
    REQUIRE(cur.rotations == 0);
    auto y = [](double s) {
      VecN out(2);
      out << 0.2 * s + 0.1 * s * s, -0.3 * s;
      return out;
    };
    auto dy = [](double s) {
      VecN out(2);
      out << 0.2 + 0.2 * s, -0.3;
      return out;
    };
    double formula = first_variation(cur, y, dy, VariationMode::formula);
    double fd = first_variation(cur, y, dy, VariationMode::fd);
    CHECK(std::abs(formula - fd) < 1e-6 * (1.0 + std::abs(formula)));
  }
}

TEST_CASE("action window from curvature constants") {
  BackgroundId fl = make_flat(2);
  FlowParams par = make_flow_params(fl, 0.7);
  VecN q(2);
  q << 1.2, -0.9;
  double tau_bar = 0.8;
  LpBoundsValue b = lp_bounds(fl, par, q, tau_bar);
  CHECK(b.d0 == doctest::Approx(q.norm()).epsilon(1e-12));
  // flat curvature constants vanish, so the lower bound is the actual value
  double L_exact = (1.0 - par.p) * q.squaredNorm() / std::pow(tau_bar, 1.0 - par.p);
  CHECK(b.lower == doctest::Approx(L_exact).epsilon(1e-12));
  CHECK(b.upper >= L_exact);

  BackgroundId sp = make_sphere(2, 1.0);
  FlowParams spar = make_flow_params(sp, 0.5);
  VecN qs(2);
  qs << 0.9, 0.0;
  LpBoundsValue bs = lp_bounds(sp, spar, qs, 0.7);
  CHECK(bs.d0 == doctest::Approx(std::sqrt(2.0) * 0.9).epsilon(1e-12));
  CHECK(bs.lower < bs.upper);
}

TEST_CASE("jacobian growth inequality") {
  BackgroundId fl = make_flat(2);
  FlowParams par = make_flow_params(fl, 0.5);
  VecN v(2);
  v << 0.9, -0.4;
  // flat case saturates: both sides reduce to (1-p) n / tau
  DlogJCheck ck = dlogj_inequality_check(fl, par, v, 1.3);
  CHECK(ck.lhs == doctest::Approx((1.0 - par.p) * 2.0 / 1.3).epsilon(1e-6));
  CHECK(ck.rhs == doctest::Approx((1.0 - par.p) * 2.0 / 1.3).epsilon(1e-10));
  CHECK(ck.violation < 1e-7);

  BackgroundId sp = make_sphere(2, 1.0);
  FlowParams spar = make_flow_params(sp, 0.75);
  VecN w(2);
  w << 0.5, 0.2;
  DlogJCheck cs = dlogj_inequality_check(sp, spar, w, 0.9);
  CHECK(cs.violation < 1e-8);
  CHECK(cs.lhs < cs.rhs);
}
