#pragma once

// Gauss-Legendre quadrature with cached nodes, a node-doubling driver for
// smooth 1-D integrands, and the spherical tensor rule over a ball used by
// the pushforward volume integrals.

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lplab {

struct GlRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

// Newton iteration on Legendre roots; rules are cached per order.
const GlRule& gl_rule(int m);

// integral of f over [a, b] with an m-point rule
template <class F>
double integrate_gl(F&& f, double a, double b, int m) {
  const GlRule& r = gl_rule(m);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < m; ++i) acc += r.weights[i] * f(mid + half * r.nodes[i]);
  return acc * half;
}

// Doubles the node count until successive values agree to rel_tol (relative
// to scale + |value|). Throws if max_m is reached while still moving.
template <class F>
double integrate_doubling(F&& f, double a, double b, double rel_tol, int m0 = 8, int max_m = 512,
                          double scale = 1.0) {
  if (!(b >= a)) throw std::invalid_argument("integrate_doubling: inverted interval");
  if (b == a) return 0.0;
  double prev = integrate_gl(f, a, b, m0);
  for (int m = 2 * m0; m <= max_m; m *= 2) {
    double cur = integrate_gl(f, a, b, m);
    if (std::abs(cur - prev) <= rel_tol * (scale + std::abs(cur))) return cur;
    prev = cur;
  }
  throw std::runtime_error("integrate_doubling: no convergence at max node count");
}

// Tanh-sinh rule with step halving; tolerates integrable endpoint
// singularities, so fractional-power time weights need no special casing.
// Abscissas near the ends are formed as endpoint plus a separately computed
// offset, which stays meaningful long after tanh itself saturates; the
// endpoints themselves are never evaluated. A singularity is resolved to
// full precision only when its endpoint is zero (the offsets then survive
// the addition); at a nonzero endpoint resolution stops near eps * |end|.
template <class F>
double integrate_de(F&& f, double a, double b, double rel_tol, int max_level = 12,
                    double scale = 1.0) {
  if (!(b >= a)) throw std::invalid_argument("integrate_de: inverted interval");
  if (b == a) return 0.0;
  const double half = 0.5 * (b - a);
  const double pi_2 = 1.5707963267948966;
  const double t_max = 6.0;
  // combined contribution of the node pair at +-t (one center node at t = 0)
  auto pair_term = [&](double t) -> double {
    double sh = pi_2 * std::sinh(t);
    double ch = std::cosh(sh);
    double w = half * pi_2 * std::cosh(t) / (ch * ch);
    if (w == 0.0 || !std::isfinite(w)) return 0.0;
    double e = std::exp(-2.0 * sh);
    double off = half * 2.0 * e / (1.0 + e);  // half * (1 - tanh(sh)), stable
    if (off <= 0.0) return 0.0;
    double xl = a + off, xr = b - off;
    double out = 0.0;
    if (xl > a && xl < b) out += w * f(xl);
    if (xr > a && xr < b && xr != xl) out += w * f(xr);
    return out;
  };
  double h = 1.0;
  double sum = pair_term(0.0);
  for (int j = 1; j * h <= t_max; ++j) sum += pair_term(j * h);
  double prev = sum * h;
  for (int level = 1; level <= max_level; ++level) {
    h *= 0.5;
    double add = 0.0;
    for (int j = 1; j * h <= t_max; j += 2) add += pair_term(j * h);
    double cur = 0.5 * prev + add * h;
    if (level >= 3 && std::abs(cur - prev) <= rel_tol * (scale + std::abs(cur))) return cur;
    prev = cur;
  }
  throw std::runtime_error("integrate_de: no convergence at max refinement level");
}

// Nodes of the tensor rule over the ball |v| <= radius in dimension n
// (1 <= n <= 3): radial GL (order m per panel, panels split at the given
// break radii), and for the angular factor a trapezoid in the azimuth (2m
// points, spectrally accurate on the circle) together with GL in cos(polar)
// for n = 3. Weights include the r^{n-1} area factor.
struct BallNode {
  double x[3];
  double weight;
  double radius;
};

std::vector<BallNode> ball_rule(int n, double radius, int m, const std::vector<double>& radial_breaks);

}  // namespace lplab
