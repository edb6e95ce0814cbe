#include "lplab/sphere_oracle.hpp"

#include <cmath>
#include <stdexcept>

#include "lplab/quadrature.hpp"

namespace lplab {

SphereOracle::SphereOracle(const BackgroundId& bg, double p) {
  if (bg.kind != BackgroundKind::sphere) {
    throw std::invalid_argument("SphereOracle: background must be a sphere");
  }
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("SphereOracle: p must lie in (0,1)");
  }
  n_ = bg.n;
  a_ = bg.a;
  p_ = p;
}

// Both time integrals run in s = tau^{1-p}; the substitution removes the
// rho^{-p} endpoint weight, and the tanh-sinh rule absorbs the fractional
// powers of s that remain at the origin when p < 1/2.

double SphereOracle::momentum_integral(double tau) const {
  if (tau < 0.0) throw std::invalid_argument("momentum_integral: tau >= 0 required");
  if (tau == 0.0) return 0.0;
  const double s_bar = std::pow(tau, 1.0 - p_);
  const double q = 1.0 / (1.0 - p_);
  auto f = [&](double s) { return 1.0 / c_of(std::pow(s, q)); };
  return q * integrate_de(f, 0.0, s_bar, 1e-13);
}

double SphereOracle::curvature_term(double tau) const {
  if (tau < 0.0) throw std::invalid_argument("curvature_term: tau >= 0 required");
  if (tau == 0.0) return 0.0;
  const double s_bar = std::pow(tau, 1.0 - p_);
  const double q = 1.0 / (1.0 - p_);
  const double w = 2.0 * p_ / (1.0 - p_);
  auto f = [&](double s) { return std::pow(s, w) * scalar_R(std::pow(s, q)); };
  return q * integrate_de(f, 0.0, s_bar, 1e-13);
}

double SphereOracle::action(double theta, double tau_bar) const {
  if (!(tau_bar > 0.0)) throw std::invalid_argument("action: tau_bar > 0 required");
  const double I = momentum_integral(tau_bar);
  return curvature_term(tau_bar) + theta * theta / I;
}

double SphereOracle::reduced_action(double theta, double tau_bar) const {
  return (1.0 - p_) * action(theta, tau_bar) / std::pow(tau_bar, 1.0 - p_);
}

double SphereOracle::v_norm_for(double theta, double tau_bar) const {
  const double k = theta / momentum_integral(tau_bar);
  return k / std::sqrt(c_of(0.0));
}

double SphereOracle::v_chart_for(double theta, double tau_bar) const {
  const double k = theta / momentum_integral(tau_bar);
  return k / c_of(0.0);
}

double SphereOracle::conjugate_v_chart(double tau_bar) const {
  const double pi = 3.14159265358979323846;
  const double k = pi / momentum_integral(tau_bar);
  return k / c_of(0.0);
}

double SphereOracle::volume_integral(double tau, double l_scale, double rel_tol) const {
  if (!(tau > 0.0)) throw std::invalid_argument("volume_integral: tau > 0 required");
  const double pi = 3.14159265358979323846;
  const double I = momentum_integral(tau);
  const double curv = curvature_term(tau);
  const double pref = l_scale * (1.0 - p_) / std::pow(tau, 1.0 - p_);
  auto f = [&](double theta) {
    const double l = pref * (curv + theta * theta / I);
    return std::exp(-l) * std::pow(std::sin(theta), n_ - 1);
  };
  const double shell = integrate_de(f, 0.0, pi, rel_tol);
  const double omega = (n_ == 2) ? 2.0 * pi : 4.0 * pi;
  return std::pow(c_of(tau), 0.5 * n_) * omega * shell;
}

double SphereOracle::volume_direct(double tau, double weight_expo, double rel_tol) const {
  return std::pow(tau, -weight_expo) * volume_integral(tau, 1.0, rel_tol);
}

}  // namespace lplab
