#include <doctest.h>

#include <cmath>

#include "lplab/background.hpp"
#include "lplab/linalg.hpp"

using namespace lplab;

namespace {

double max_abs(const MatN& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("flat jet is euclidean and static") {
  BackgroundId bg = make_flat(3);
  VecN x(3);
  x << 0.3, -1.2, 0.7;
  MetricJet j = sample_jet(bg, x, 0.9);
  CHECK(max_abs(MatN(j.g - MatN::Identity(3, 3))) == 0.0);
  CHECK(j.scalar_R == 0.0);
  CHECK(max_abs(j.ric) == 0.0);
  CHECK(j.grad_R.norm() == 0.0);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) CHECK(j.christoffel.at(a, b, c) == 0.0);
}

TEST_CASE("sphere scalar curvature and radius match the shrinking family") {
  for (int n : {2, 3}) {
    BackgroundId bg = make_sphere(n, 1.0);
    for (double tau : {0.0, 0.5, 1.7}) {
      MetricJet j = sample_jet(bg, VecN::Zero(n), tau);
      double c = 2.0 * (n - 1) * (tau + 1.0);
      CHECK(j.scalar_R == doctest::Approx(n / (2.0 * (tau + 1.0))).epsilon(1e-13));
      CHECK(max_abs(MatN(j.g - c * MatN::Identity(n, n))) < 1e-13);
    }
  }
}

TEST_CASE("backward flow equation holds on all models") {
  struct Case {
    BackgroundId bg;
    VecN x;
  };
  std::vector<Case> cases;
  cases.push_back({make_flat(2), (VecN(2) << 0.4, -0.9).finished()});
  cases.push_back({make_sphere(2, 1.0), (VecN(2) << 0.6, 0.3).finished()});
  cases.push_back({make_sphere(3, 0.5), (VecN(3) << 0.2, -0.4, 0.5).finished()});
  cases.push_back({make_cigar(2.0), (VecN(2) << 3.0, -1.5).finished()});
  for (const auto& c : cases)
    // h near eps^(1/4): the check includes a second difference of R, whose
    // rounding error grows as 1/h^2 once h drops past that point
    for (double tau : {0.2, 1.3}) CHECK(flow_consistency_check(c.bg, c.x, tau, 1e-4) < 1e-6);
}

TEST_CASE("sphere ricci tensor is einstein") {
  BackgroundId bg = make_sphere(3, 1.0);
  VecN x(3);
  x << 0.5, -0.2, 0.3;
  MetricJet j = sample_jet(bg, x, 0.7);
  // Ric = (R/n) g for the round metric
  CHECK(max_abs(MatN(j.ric - (j.scalar_R / 3.0) * j.g)) < 1e-12);
}

TEST_CASE("distance at the initial slice has the expected closed forms") {
  SUBCASE("flat") {
    BackgroundId bg = make_flat(2);
    VecN x(2), y(2);
    x << 1.0, 2.0;
    y << -2.0, 6.0;
    CHECK(distance_g0(bg, x, y) == doctest::Approx(5.0).epsilon(1e-12));
  }
  SUBCASE("sphere radial") {
    BackgroundId bg = make_sphere(2, 1.0);
    VecN o = VecN::Zero(2), x(2);
    x << 0.8, 0.0;
    // normal coordinates: distance = sqrt(c(0)) * |x|
    CHECK(distance_g0(bg, o, x) == doctest::Approx(std::sqrt(2.0) * 0.8).epsilon(1e-10));
  }
  SUBCASE("cigar radial") {
    BackgroundId bg = make_cigar(1.0);
    VecN o = VecN::Zero(2), x(2);
    x << 4.0, 0.0;
    double F = std::exp(4.0 * 1.0);
    CHECK(distance_g0(bg, o, x) ==
          doctest::Approx(std::asinh(4.0 / std::sqrt(F))).epsilon(1e-10));
  }
}

TEST_CASE("sphere chart round trips") {
  int n = 2;
  MatE id = identity_frame(n);
  VecN x(2);
  x << 1.1, -0.4;
  VecE amb = chart_to_ambient(id, x);
  CHECK(amb.norm() == doctest::Approx(1.0).epsilon(1e-14));
  VecN back = ambient_to_chart(id, amb);
  CHECK((back - x).norm() < 1e-14);

  VecN xdot(2);
  xdot << 0.3, 0.9;
  VecE vd = chart_velocity_to_ambient(id, x, xdot);
  CHECK(std::fabs(vd.dot(amb)) < 1e-14);  // tangency
  VecN vback = ambient_velocity_to_chart(id, x, vd);
  CHECK((vback - xdot).norm() < 1e-13);
}

TEST_CASE("recentered frames are rotations") {
  int n = 2;
  MatE id = identity_frame(n);
  VecN x(2);
  x << 2.8, 1.1;  // near the guard band
  MatE next = recenter_frame(id, x);
  CHECK(max_abs(MatN(next * next.transpose() - MatE::Identity(n + 1, n + 1))) < 1e-12);
  CHECK(next.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  // the recentered chart places the current point at its origin
  VecN moved = chart_point_to(id, x, next);
  CHECK(moved.norm() < 1e-12);
  // transunderlying point unchanged: angles to a third point agree
  VecN y(2);
  y << 0.4, -0.2;
  VecN y2 = chart_point_to(id, y, next);
  CHECK(sphere_angle(x, y) == doctest::Approx(std::acos(
            double(chart_to_ambient(next, moved).dot(chart_to_ambient(next, y2))))).epsilon(1e-9));
}

TEST_CASE("parabolic rescaling reproduces the metric identity") {
  // g'(tau) = g(lambda tau) / lambda at sampled points
  double lam = 2.5;
  std::vector<BackgroundId> models = {make_flat(2), make_sphere(2, 1.0), make_cigar(2.0)};
  for (const BackgroundId& bg : models) {
    BackgroundId sc = rescale(bg, lam);
    VecN x(2);
    x << 0.35, -0.2;
    for (double tau : {0.1, 0.6}) {
      MetricJet a = sample_jet(sc, x, tau);
      MetricJet b = sample_jet(bg, x, lam * tau);
      CHECK(max_abs(MatN(a.g - b.g / lam)) < 1e-12 * max_abs(b.g));
      CHECK(a.scalar_R == doctest::Approx(lam * b.scalar_R).epsilon(1e-12));
    }
  }
}

TEST_CASE("curvature bounds dominate sampled curvature") {
  for (const BackgroundId& bg : {make_sphere(2, 1.0), make_cigar(2.0)}) {
    CurvatureBounds cb = curvature_bounds(bg);
    for (double tau : {0.05, 0.9, 1.9}) {
      for (double r : {0.0, 0.7, 2.0}) {
        VecN x = VecN::Zero(bg.n);
        x(0) = r;
        MetricJet j = sample_jet(bg, x, tau);
        CHECK(j.scalar_R <= cb.r_sup + 1e-12);
        // Ric bounds as quadratic forms
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
            Eigen::MatrixXd(j.g).inverse() * Eigen::MatrixXd(j.ric));
        CHECK(es.eigenvalues().minCoeff() >= -cb.c1 - 1e-12);
        CHECK(es.eigenvalues().maxCoeff() <= cb.c2 + 1e-12);
      }
    }
  }
}

TEST_CASE("flow window bookkeeping") {
  BackgroundId cg = make_cigar(3.0);
  FlowParams par = make_flow_params(cg, 0.6);
  CHECK(par.t0 == 3.0);
  CHECK(window_cap(par) == 3.0);

  BackgroundId sp = make_sphere(2, 1.0);
  FlowParams ps = make_flow_params(sp, 0.6, 50.0);
  CHECK(ps.t0 == -1.0);  // ancient marker carries the radius offset
  CHECK(window_cap(ps) == 50.0);

  CHECK_THROWS_AS(make_flow_params(sp, 1.2), std::invalid_argument);
  CHECK_THROWS_AS(make_flow_params(sp, 0.0), std::invalid_argument);
}
