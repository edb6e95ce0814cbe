#include <doctest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "lplab/background.hpp"
#include "lplab/linalg.hpp"
#include "lplab/quadrature.hpp"
#include "lplab/util.hpp"
#include "lplab/volume.hpp"

using namespace lplab;

TEST_CASE("gauss-legendre rules") {
  for (int m : {5, 20, 64}) {
    const GlRule& r = gl_rule(m);
    REQUIRE(static_cast<int>(r.nodes.size()) == m);
    double wsum = 0.0;
    for (int i = 0; i < m; ++i) {
      wsum += r.weights[i];
      CHECK(r.weights[i] > 0.0);
      if (i > 0) CHECK(r.nodes[i] > r.nodes[i - 1]);
    }
    CHECK(wsum == doctest::Approx(2.0).epsilon(1e-14));
    // exact through degree 2m-1
    int d = 2 * m - 1;
    double got = integrate_gl([&](double x) { return std::pow(x, d); }, 0.0, 1.0, m);
    CHECK(got == doctest::Approx(1.0 / (d + 1)).epsilon(1e-12));
  }
}

TEST_CASE("tanh-sinh handles endpoint weights") {
  CHECK(integrate_de([](double x) { return 1.0 / std::sqrt(x); }, 0.0, 1.0, 1e-12) ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(integrate_de([](double x) { return std::pow(x, -0.75); }, 0.0, 1.0, 1e-12) ==
        doctest::Approx(4.0).epsilon(1e-8));
  // singular approach to a right endpoint at zero
  CHECK(integrate_de([](double x) { return std::pow(-x, -0.6); }, -1.0, 0.0, 1e-12) ==
        doctest::Approx(2.5).epsilon(1e-8));
  CHECK(integrate_de([](double x) { return std::cos(x); }, 0.0, 1.3, 1e-13) ==
        doctest::Approx(std::sin(1.3)).epsilon(1e-13));
  CHECK(integrate_de([](double x) { return x; }, 2.0, 2.0, 1e-12) == 0.0);
  CHECK_THROWS_AS(integrate_de([](double x) { return x; }, 1.0, 0.0, 1e-12),
                  std::invalid_argument);
}

TEST_CASE("ball rule integrates a gaussian") {
  for (int n : {1, 2, 3}) {
    double radius = 3.5;
    std::vector<BallNode> nodes = ball_rule(n, radius, 24, {1.0, 2.0});
    double acc = 0.0;
    for (const auto& nd : nodes) {
      double r2 = 0.0;
      for (int i = 0; i < n; ++i) r2 += nd.x[i] * nd.x[i];
      acc += nd.weight * std::exp(-r2);
      CHECK(nd.radius <= radius + 1e-12);
    }
    // truncated gaussian mass; the tail beyond 3.5 is ~1e-6 of the total
    double full = std::pow(M_PI, 0.5 * n);
    CHECK(acc == doctest::Approx(full).epsilon(1e-4));
  }
  CHECK_THROWS_AS(ball_rule(4, 1.0, 8, {}), std::invalid_argument);
}

TEST_CASE("summation and threading helpers") {
  std::vector<double> data;
  for (int i = 0; i < 2000; ++i) data.push_back((i % 2 == 0 ? 1.0 : -1.0) * 1e8 + 1.0);
  CHECK(pairwise_sum(data) == 2000.0);

  std::vector<double> out(500, 0.0);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = std::sqrt(static_cast<double>(i)); });
  for (std::size_t i = 0; i < out.size(); ++i)
    CHECK(out[i] == std::sqrt(static_cast<double>(i)));

  std::atomic<int> seen{0};
  CHECK_THROWS_AS(parallel_for(64, 4,
                               [&](std::size_t i) {
                                 seen.fetch_add(1);
                                 if (i == 13) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
  CHECK(seen.load() >= 1);
}

TEST_CASE("drift and envelope constants") {
  BackgroundId sp = make_sphere(2, 1.0);
  FlowParams half = make_flow_params(sp, 0.5);
  CHECK(a0_constant(half, 0.5, curvature_bounds(sp).r_sup) == 0.0);
  CHECK(tau0_constant(half) == doctest::Approx(window_cap(half)).epsilon(1e-12));

  FlowParams p6 = make_flow_params(sp, 0.6);
  CHECK(a0_constant(p6, 0.5, curvature_bounds(sp).r_sup) > 0.0);
  CHECK_THROWS_AS(a0_constant(p6, 1.2, 1.0), std::range_error);
  CHECK_THROWS_AS(a0_constant(p6, 0.0, 1.0), std::range_error);
  // cap of the p > 1/2 window: (2(1-p))^{-1/(2p-1)}
  CHECK(tau0_constant(p6) == doctest::Approx(std::pow(0.8, -5.0)).epsilon(1e-12));

  CHECK(rho_cap(0.5) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(rho_cap(0.6) == doctest::Approx(3.0517578125).epsilon(1e-12));
  CHECK(rho_cap(0.75) == doctest::Approx(4.0).epsilon(1e-12));

  BackgroundId fl = make_flat(2);
  FlowParams fpar = make_flow_params(fl, 0.75);
  CHECK(c1_envelope_constant(fl, fpar, 0.5) == 0.0);
  CHECK(c0_constant(sp, p6) > 0.0);
  CHECK(c1_envelope_constant(sp, p6, 0.5) > 0.0);
}

TEST_CASE("flat reduced volume is the gaussian constant") {
  for (int n : {1, 2, 3}) {
    BackgroundId bg = make_flat(n);
    for (double p : {0.5, 0.75}) {
      FlowParams par = make_flow_params(bg, p);
      double expect = std::pow(std::sqrt(M_PI) / (1.0 - p), n);
      for (double tau : {0.4, 2.5}) {
        PushforwardResult full = reduced_volume_pushforward_full(bg, par, tau);
        CHECK(full.value == doctest::Approx(expect).epsilon(1e-6));
        CHECK(full.tail_fraction < 1e-8);
        CHECK(full.failed == 0);
        CHECK(full.admissible == full.nodes);
        CHECK(full.radius > 0.0);
      }
    }
  }

  // tensor fallback sees the same number
  BackgroundId b2 = make_flat(2);
  FlowParams par = make_flow_params(b2, 0.5);
  PushforwardQuad quad;
  quad.force_tensor = true;
  PushforwardResult t = reduced_volume_pushforward_full(b2, par, 1.0, quad);
  CHECK_FALSE(t.radial);
  CHECK(t.value == doctest::Approx(4.0 * M_PI).epsilon(1e-6));
}

TEST_CASE("integrand monotonicity on the flat model is exactly flat") {
  BackgroundId bg = make_flat(2);
  FlowParams par = make_flow_params(bg, 0.5);
  VecN v(2);
  v << 0.6, -0.3;
  std::vector<double> grid = {0.3, 0.6, 1.2, 2.4};
  ZpCheck zc = zp_monotone_check(bg, par, v, grid);
  CHECK(zc.ok);
  CHECK(zc.max_violation < 1e-9);
  for (double d : zc.dlog_z) CHECK(std::abs(d) < 1e-8);
}

TEST_CASE("sphere volume scan stays monotone under the corrected weight") {
  BackgroundId bg = make_sphere(2, 1.0);
  FlowParams par = make_flow_params(bg, 0.5);
  std::vector<double> grid = {0.3, 0.55, 1.0, 1.8};
  PushforwardQuad quad;
  quad.order = 16;
  VolumeScan scan = monotonicity_scan(bg, par, grid, 0.5, quad);
  REQUIRE(scan.taus.size() == grid.size());
  CHECK(scan.method == "direct");
  CHECK(scan.A0 == 0.0);
  CHECK(scan.all_ok);
  double limit = std::pow(std::sqrt(M_PI) / 0.5, 2);
  for (std::size_t i = 0; i < scan.values.size(); ++i) {
    CHECK(scan.weights[i] == 1.0);
    CHECK(scan.values[i] <= limit + 1e-6);
    if (i > 0) CHECK(scan.weighted[i] <= scan.weighted[i - 1] + 1e-9);
  }

  // non-compact models go through the pushforward; flat values sit at the limit
  BackgroundId fl = make_flat(2);
  FlowParams fpar = make_flow_params(fl, 0.5);
  VolumeScan fscan = monotonicity_scan(fl, fpar, {0.4, 1.0, 2.2}, 0.5, quad);
  CHECK(fscan.method == "pushforward");
  CHECK(fscan.all_ok);
  for (double val : fscan.values) CHECK(val == doctest::Approx(limit).epsilon(1e-6));
}

TEST_CASE("rescaled volume on the flat model") {
  BackgroundId bg = make_flat(2);
  FlowParams par = make_flow_params(bg, 0.5);
  // self-similar case: the gaussian constant times rho^{(1-p)n/2}, for any tau_bar
  for (auto [tau_bar, rho] : {std::pair{0.7, 1.3}, {2.0, 0.4}}) {
    double expect = 4.0 * M_PI * std::sqrt(rho);
    CHECK(rescaled_volume(bg, par, tau_bar, rho) == doctest::Approx(expect).epsilon(1e-6));
  }
  CHECK_THROWS_AS(rescaled_volume(bg, par, 1.0, 3.0, true), std::range_error);
}
