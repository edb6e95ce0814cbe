#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "lplab/background.hpp"
#include "lplab/bvp.hpp"
#include "lplab/sphere_oracle.hpp"
#include "lplab/util.hpp"

using namespace lplab;

TEST_CASE("flat solves recover the closed form") {
  BackgroundId bg = make_flat(2);
  VecN q(2);
  q << 1.1, -0.6;
  for (double p : {0.5, 0.8}) {
    FlowParams par = make_flow_params(bg, p);
    double tau_bar = 1.6;
    ReducedSolution sol = solve_lp(bg, par, q, tau_bar);
    double s_bar = std::pow(tau_bar, 1.0 - p);
    CHECK((sol.v_star - (1.0 - p) / s_bar * q).norm() < 1e-8);
    double l_exact = std::pow(1.0 - p, 2) * q.squaredNorm() / (s_bar * s_bar);
    CHECK(sol.value.l_p == doctest::Approx(l_exact).epsilon(1e-9));
    CHECK(sol.in_omega);
    CHECK(sol.conjugate_free);
    CHECK(sol.basin_count == 1);
    CHECK(sol.residual < 1e-8);
    CHECK(velocity_ball_radius(bg, par, q, tau_bar) >= sol.v_star.norm());
  }
}

TEST_CASE("sphere solves agree with the reduced oracle") {
  BackgroundId bg = make_sphere(2, 1.0);
  SolveOptions opt;
  struct Sample {
    double p, theta, tau_bar;
  };
  std::vector<Sample> samples = {
      {0.5, 0.6, 0.5}, {0.5, 1.8, 1.0}, {0.6, 1.2, 0.8}, {0.6, 2.4, 2.0}, {0.75, 0.9, 1.5}};
  for (const auto& sm : samples) {
    FlowParams par = make_flow_params(bg, sm.p);
    SphereOracle oracle(bg, sm.p);
    VecN q(2);
    q << sm.theta, 0.0;
    ReducedSolution sol = solve_lp(bg, par, q, sm.tau_bar, opt);
    CHECK(sol.value.l_p ==
          doctest::Approx(oracle.reduced_action(sm.theta, sm.tau_bar)).epsilon(1e-8));
    CHECK(sol.v_star.norm() ==
          doctest::Approx(oracle.v_chart_for(sm.theta, sm.tau_bar)).epsilon(1e-7));
    // the chart datum points along the target's great circle
    CHECK(sol.v_star.dot(q) > 0.0);
    CHECK(velocity_ball_radius(bg, par, q, sm.tau_bar) * std::sqrt(oracle.c_of(0.0)) >=
          sol.v_star.norm() * std::sqrt(oracle.c_of(0.0)) - 1e-12);
  }

  // past the equator both orientations converge; the short arc must win
  FlowParams par = make_flow_params(bg, 0.5);
  VecN q(2);
  q << 2.9, 0.0;
  ReducedSolution sol = solve_lp(bg, par, q, 1.0, opt);
  CHECK(sol.basin_count >= 2);
  CHECK(sol.in_omega);
  CHECK(sol.v_star(0) > 0.0);
  CHECK(sol.basin_separation > 0.0);
}

TEST_CASE("solved value is a lower bound among curves with the same endpoints") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = make_flow_params(bg, 0.5);
  VecN q(2);
  q << 1.3, 0.4;
  double tau_bar = 1.2;
  ReducedSolution sol = solve_lp(bg, par, q, tau_bar);
  REQUIRE(sol.curve.rotations == 0);

  std::vector<double> s_nodes = sol.curve.node_s();
  std::vector<CurveState> states = sol.curve.node_states();
  double s_bar = sol.curve.s_bar;
  for (int trial = 0; trial < 4; ++trial) {
    double amp = 0.08 + 0.04 * trial;
    double freq = (trial + 1) * M_PI / s_bar;
    std::vector<VecN> xs, us;
    for (std::size_t i = 0; i < s_nodes.size(); ++i) {
      double s = s_nodes[i];
      VecN bump(2);
      bump << std::sin(freq * s), -0.5 * std::sin(freq * s);
      VecN dbump(2);
      dbump << freq * std::cos(freq * s), -0.5 * freq * std::cos(freq * s);
      xs.push_back(VecN(states[i].x + amp * bump));
      us.push_back(VecN(states[i].u + amp * dbump));
    }
    // sin(freq s) vanishes at both ends only for integer multiples; force it
    xs.front() = states.front().x;
    xs.back() = states.back().x;
    GeodesicCurve wiggle = curve_from_nodes(bg, par, s_nodes, xs, us);
    CHECK(lp_length(wiggle).L_p >= sol.value.L_p - 1e-8);
  }
}

TEST_CASE("small-time reduced distance approaches the squared datum") {
  struct Model {
    BackgroundId bg;
    double p;
  };
  std::vector<Model> models = {
      {make_flat(2), 0.5}, {make_sphere(2, 1.0), 0.6}, {make_cigar(2.0), 0.75}};
  double tau = 1e-4;
  for (const auto& mo : models) {
    FlowParams par = make_flow_params(mo.bg, mo.p);
    for (int i = 0; i < 3; ++i) {
      VecN v(2);
      v << 0.9 * (2.0 * halton(7 * i + 1, 2) - 1.0), 0.9 * (2.0 * halton(7 * i + 1, 3) - 1.0);
      VecN q = lp_exp(mo.bg, par, v, tau);
      SolveOptions opt;
      opt.has_hint = true;
      opt.hint = v;
      ReducedSolution sol = solve_lp(mo.bg, par, q, tau, opt);
      MetricJet j0 = sample_jet(mo.bg, par.p0, 0.0);
      CHECK(std::abs(sol.value.l_p - v.dot(j0.g * v)) < 1e-3);
    }
  }
}

TEST_CASE("flat minimum scan closed forms") {
  BackgroundId bg = make_flat(2);
  FlowParams par = make_flow_params(bg, 0.7);
  std::vector<VecN> grid;
  for (double gx : {-0.8, 0.0, 0.9})
    for (double gy : {-0.7, 0.0, 0.6}) grid.push_back(VecN((VecN(2) << gx, gy).finished()));

  std::vector<double> taus = {0.3, 0.9, 1.8};
  std::vector<GpRow> rows = g_p_scan(bg, par, taus, grid);
  REQUIRE(rows.size() == taus.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    // the origin wins, where the action vanishes
    CHECK(rows[i].g_p == doctest::Approx(-2.0 / (2.0 * 0.7) * taus[i]).epsilon(1e-9));
    CHECK(rows[i].argmin.norm() < 1e-9);
  }

  MinLpCheck mc = min_lp_bound_check(bg, par, 0.9, grid);
  CHECK(mc.ok);
  CHECK(mc.min_lp < 1e-10);
  CHECK(mc.bound ==
        doctest::Approx(2.0 * (1.0 - 0.7) / (2.0 * 0.7 * std::pow(0.9, 1.0 - 2.0 * 0.7)))
            .epsilon(1e-12));
}

TEST_CASE("evolution residual of the closed-form flat field") {
  BackgroundId bg = make_flat(2);
  FlowParams par = make_flow_params(bg, 0.5);
  auto exact = [](const VecN& x, double tau) { return x.squaredNorm() / (4.0 * tau); };
  VecN center(2);
  center << 0.1, -0.2;
  double res = lp_pde_residual(bg, par, exact, center, 1.0, 33, 0.7);
  CHECK(res < 1e-6);

  auto off = [&](const VecN& x, double tau) { return 1.05 * exact(x, tau); };
  CHECK(lp_pde_residual(bg, par, off, center, 1.0, 33, 0.7) > 1e-2);

  FlowParams bad = make_flow_params(bg, 0.6);
  CHECK_THROWS_AS(lp_pde_residual(bg, bad, exact, center, 1.0, 33, 0.7), std::invalid_argument);
  BackgroundId sp = make_sphere(2, 1.0);
  FlowParams spar = make_flow_params(sp, 0.5);
  CHECK_THROWS_AS(lp_pde_residual(sp, spar, exact, center, 1.0, 33, 0.7), std::invalid_argument);
}

TEST_CASE("gradient and laplacian identities at a solved point") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = make_flow_params(bg, 0.5);
  VecN q(2);
  q << 0.8, -0.3;
  ReducedSolution sol = solve_lp(bg, par, q, 0.9);
  GradCheck gc = grad_L_check(bg, par, sol, 0.005);
  CHECK(gc.rel_error < 1e-4);
  LaplacianCheck lc = laplacian_L_check(bg, par, sol, 0.005);
  CHECK(lc.violation <= 1e-4 * (1.0 + std::abs(lc.rhs)));
}
