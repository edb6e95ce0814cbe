#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lplab/action.hpp"
#include "lplab/background.hpp"
#include "lplab/geodesic.hpp"
#include "lplab/quadrature.hpp"

using namespace lplab;

namespace {

FlowParams params_for(const BackgroundId& bg, double p) { return make_flow_params(bg, p); }

// great-circle momentum integral int_0^tau rho^{-p}/c(rho) drho on sphere(n, a)
double momentum_integral(int n, double a, double p, double tau) {
  return integrate_de([&](double rho) { return std::pow(rho, -p) / (2.0 * (n - 1) * (rho + a)); },
                      0.0, tau, 1e-13);
}

}  // namespace

TEST_CASE("flat curves follow the closed form in s") {
  BackgroundId bg = make_flat(3);
  VecN v(3);
  v << 0.7, -0.4, 0.2;
  for (double p : {0.5, 0.75, 0.9}) {
    FlowParams par = params_for(bg, p);
    double tau_bar = 2.0;
    GeodesicCurve cur = shoot(bg, par, v, tau_bar);
    CHECK(cur.rotations == 0);
    CHECK((cur.v0() - v / (1.0 - p)).norm() < 1e-15);
    double s_bar = std::pow(tau_bar, 1.0 - p);
    CHECK(cur.s_bar == doctest::Approx(s_bar).epsilon(1e-12));
    CHECK(cur.tau_of_s(cur.s_of_tau(1.3)) == doctest::Approx(1.3).epsilon(1e-12));
    for (double f : {0.15, 0.6, 1.0}) {
      CurveState st = cur.state_at(f * s_bar);
      VecN x_exact = (f * s_bar / (1.0 - p)) * v;
      CHECK((st.x - x_exact).norm() < 1e-9);
      CHECK((st.u - v / (1.0 - p)).norm() < 1e-9);
      CHECK(st.du.norm() < 1e-8);
    }
    CHECK((cur.endpoint_primary() - (s_bar / (1.0 - p)) * v).norm() < 1e-9);
    CHECK(el_residual(cur) < 1e-10);
  }
}

TEST_CASE("sphere endpoint angle matches the momentum integral") {
  BackgroundId bg = make_sphere(2, 1.0);
  // p = 1/2: the integral is atan(sqrt(tau)) in closed form
  FlowParams par = params_for(bg, 0.5);
  VecN v(2);
  v << 1.0, 0.0;
  GeodesicCurve cur = shoot(bg, par, v, 1.0);
  CHECK(cur.rotations == 0);
  double theta = sphere_angle(par.p0, cur.endpoint_primary());
  CHECK(theta == doctest::Approx(M_PI / 2.0).epsilon(1e-8));

  for (double tau_bar : {0.3, 1.7}) {
    VecN w(2);
    w << 0.5, -0.6;
    GeodesicCurve c2 = shoot(bg, par, w, tau_bar);
    double k = 2.0 * w.norm();  // c(0) |v| for n = 2, a = 1
    double expect = k * std::atan(std::sqrt(tau_bar));
    CHECK(sphere_angle(par.p0, c2.endpoint_primary()) == doctest::Approx(expect).epsilon(1e-7));
  }

  // fractional weight, integral evaluated independently
  FlowParams par34 = params_for(bg, 0.75);
  VecN u(2);
  u << 0.9, 0.0;
  GeodesicCurve c3 = shoot(bg, par34, u, 0.8);
  double expect = 2.0 * u.norm() * momentum_integral(2, 1.0, 0.75, 0.8);
  CHECK(sphere_angle(par34.p0, c3.endpoint_primary()) == doctest::Approx(expect).epsilon(1e-7));
}

TEST_CASE("antipodal crossing rotates the chart and lands where it should") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = params_for(bg, 0.5);
  VecN v(2);
  v << 2.5, 0.0;  // k = 5, angle 5 atan(sqrt(tau)) passes pi inside [0, 1]
  GeodesicCurve cur = shoot(bg, par, v, 1.0);
  CHECK(cur.rotations >= 1);
  CHECK(cur.charts.size() >= 2);
  double theta = sphere_angle(par.p0, cur.endpoint_primary());
  CHECK(theta == doctest::Approx(2.0 * M_PI - 5.0 * M_PI / 4.0).epsilon(1e-7));

  // chart transfer agrees with the ambient embedding at a post-rotation time
  CurveState st = cur.state_at(cur.s_bar);
  CurveState st0 = cur.state_at_in_chart(cur.s_bar, 0);
  VecE a_native = chart_to_ambient(cur.frame(st.chart), st.x);
  VecE a_primary = chart_to_ambient(cur.frame(0), st0.x);
  CHECK((a_native - a_primary).norm() < 1e-9);
  VecE vel_native = chart_velocity_to_ambient(cur.frame(st.chart), st.x, st.u);
  VecE vel_primary = chart_velocity_to_ambient(cur.frame(0), st0.x, st0.u);
  CHECK((vel_native - vel_primary).norm() < 1e-8);

  CHECK_THROWS_AS(shoot(bg, par, VecN((VecN(2) << 50.0, 0.0).finished()), 1.0),
                  std::runtime_error);
}

TEST_CASE("flat jacobian density is exact in both modes") {
  BackgroundId bg = make_flat(2);
  VecN v(2);
  v << 0.7, -0.3;
  for (double p : {0.5, 0.75}) {
    FlowParams par = params_for(bg, p);
    for (double tau_bar : {0.3, 2.0}) {
      double exact = std::pow(std::pow(tau_bar, 1.0 - p) / (1.0 - p), 2);
      JacobianRecord fd = exp_jacobian(bg, par, v, tau_bar, JacobianMode::fd_bundle);
      JacobianRecord va = exp_jacobian(bg, par, v, tau_bar, JacobianMode::variational);
      CHECK(fd.jp == doctest::Approx(exact).epsilon(1e-6));
      CHECK(va.jp == doctest::Approx(exact).epsilon(1e-9));
      CHECK(fd.conjugate_times.empty());
      CHECK(va.conjugate_times.empty());
      MatN expect = (std::pow(tau_bar, 1.0 - p) / (1.0 - p)) * MatN::Identity(2, 2);
      CHECK((va.matrix - expect).norm() < 1e-8 * expect.norm());
    }
  }
}

TEST_CASE("sphere conjugate time and signed density past it") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = params_for(bg, 0.5);
  VecN v(2);
  v << 2.5, 0.0;
  // transverse field vanishes where the swept angle reaches pi:
  // 5 atan(sqrt(tau)) = pi at tau = tan(pi/5)^2
  double tau_conj = std::pow(std::tan(M_PI / 5.0), 2);
  JacobianRecord rec = exp_jacobian(bg, par, v, 1.0, JacobianMode::fd_bundle);
  REQUIRE(rec.conjugate_times.size() == 1);
  CHECK(rec.conjugate_times[0] == doctest::Approx(tau_conj).epsilon(1e-3));
  CHECK(rec.jp < 0.0);

  // short of the antipodal guard the density stays positive and the two
  // bundle constructions agree
  JacobianRecord fd = exp_jacobian(bg, par, v, 0.45, JacobianMode::fd_bundle);
  JacobianRecord va = exp_jacobian(bg, par, v, 0.45, JacobianMode::variational);
  CHECK(fd.conjugate_times.empty());
  CHECK(va.conjugate_times.empty());
  CHECK(va.jp > 0.0);
  CHECK(fd.jp == doctest::Approx(va.jp).epsilon(1e-5));
}

TEST_CASE("jacobian grid agrees with single evaluations") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = params_for(bg, 0.5);
  VecN v(2);
  v << 0.8, 0.3;
  std::vector<double> taus = {0.25, 0.5, 1.0};
  for (JacobianMode mode : {JacobianMode::fd_bundle, JacobianMode::variational}) {
    std::vector<JacobianRecord> grid = exp_jacobian_grid(bg, par, v, taus, mode);
    REQUIRE(grid.size() == taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
      JacobianRecord single = exp_jacobian(bg, par, v, taus[i], mode);
      CHECK(grid[i].jp == doctest::Approx(single.jp).epsilon(1e-7));
      CHECK(grid[i].conjugate_times.empty());
    }
  }
}

TEST_CASE("variational and difference bundles agree off the flat model") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = params_for(bg, 0.75);
  VecN v(2);
  v << 0.4, -0.2;
  JacobianRecord fd = exp_jacobian(bg, par, v, 1.2, JacobianMode::fd_bundle);
  JacobianRecord va = exp_jacobian(bg, par, v, 1.2, JacobianMode::variational);
  CHECK(fd.jp == doctest::Approx(va.jp).epsilon(1e-5));
}

TEST_CASE("variation equation defects") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = params_for(bg, 0.5);
  VecN v(2);
  v << 0.6, 0.2;
  VariationalBundle vb = variational_bundle(bg, par, v, 1.0);
  for (int c = 0; c < vb.dim; ++c) CHECK(jacobi_residual(vb, c) < 1e-7);
  CHECK_THROWS_AS(jacobi_residual(vb, 5), std::invalid_argument);

  // affine fields solve the flat variation equation exactly
  BackgroundId fl = make_flat(2);
  FlowParams fpar = params_for(fl, 0.5);
  GeodesicCurve cur = shoot(fl, fpar, v, 1.0);
  std::vector<VecN> field;
  for (double s : cur.node_s()) {
    VecN y(2);
    y << 0.3 + 0.9 * s, -0.1 + 0.4 * s;
    field.push_back(y);
  }
  CHECK(jacobi_residual(cur, field) < 1e-10);
}

TEST_CASE("node curves feed the residual check") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = params_for(bg, 0.5);

  // the solver's own curve re-evaluates to a tiny defect
  VecN v(2);
  v << 0.9, -0.5;
  GeodesicCurve solved = shoot(bg, par, v, 1.5);
  CHECK(el_residual(solved) < 1e-9);

  // a straight chart segment is not a curve of this flow on the sphere
  int m = 41;
  double s_bar = std::sqrt(1.5);
  VecN w(2);
  w << 1.2, 0.0;
  std::vector<double> s_nodes;
  std::vector<VecN> xs, us;
  for (int i = 0; i < m; ++i) {
    double s = s_bar * i / (m - 1);
    s_nodes.push_back(s);
    xs.push_back(VecN(s * w));
    us.push_back(w);
  }
  GeodesicCurve bent = curve_from_nodes(bg, par, s_nodes, xs, us);
  CHECK_FALSE(bent.has_accel);
  CHECK(el_residual(bent) > 1e-3);

  CHECK_THROWS_AS(curve_from_nodes(bg, par, {0.0, 0.5}, xs, us), std::invalid_argument);
}

TEST_CASE("shoot rejects malformed requests") {
  BackgroundId bg = make_flat(2);
  FlowParams par = params_for(bg, 0.5);
  VecN v3(3);
  v3.setZero();
  CHECK_THROWS_AS(shoot(bg, par, v3, 1.0), std::invalid_argument);
  VecN v(2);
  v.setZero();
  CHECK_THROWS_AS(shoot(bg, par, v, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(shoot(bg, par, v, par.tau_max * 2.0), std::invalid_argument);
}
