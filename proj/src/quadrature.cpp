#include "lplab/quadrature.hpp"

#include <algorithm>

namespace lplab {

namespace {

GlRule compute_rule(int m) {
  GlRule r;
  r.nodes.resize(m);
  r.weights.resize(m);
  for (int k = 0; k < m; ++k) {
    // Chebyshev-flavored initial guess, then Newton on P_m
    double x = std::cos(M_PI * (k + 0.75) / (m + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= m; ++j) {
        double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      pp = m * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.nodes[m - 1 - k] = x;
    r.weights[m - 1 - k] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

}  // namespace

const GlRule& gl_rule(int m) {
  if (m < 1 || m > 4096) throw std::invalid_argument("gl_rule: order out of range");
  static std::map<int, GlRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(m);
  if (it == cache.end()) it = cache.emplace(m, compute_rule(m)).first;
  return it->second;
}

std::vector<BallNode> ball_rule(int n, double radius, int m,
                                const std::vector<double>& radial_breaks) {
  if (n < 1 || n > 3) throw std::invalid_argument("ball_rule: dimension must be 1..3");
  if (!(radius > 0.0)) throw std::invalid_argument("ball_rule: radius must be positive");
  if (m < 2) throw std::invalid_argument("ball_rule: order too small");

  // panel edges: 0 < breaks... < radius, duplicates and out-of-range ignored
  std::vector<double> edges{0.0};
  for (double b : radial_breaks)
    if (b > 1e-12 && b < radius * (1.0 - 1e-12)) edges.push_back(b);
  edges.push_back(radius);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-12; }),
              edges.end());

  const GlRule& rad = gl_rule(m);
  std::vector<std::pair<double, double>> rnodes;  // (r, weight * r^{n-1})
  for (size_t e = 0; e + 1 < edges.size(); ++e) {
    double mid = 0.5 * (edges[e] + edges[e + 1]), half = 0.5 * (edges[e + 1] - edges[e]);
    for (int i = 0; i < m; ++i) {
      double r = mid + half * rad.nodes[i];
      rnodes.emplace_back(r, rad.weights[i] * half * std::pow(r, n - 1));
    }
  }

  std::vector<BallNode> out;
  if (n == 1) {
    // two directions on the line
    for (auto& [r, w] : rnodes)
      for (int sgn : {-1, 1}) {
        BallNode b{};
        b.x[0] = sgn * r;
        b.weight = w;
        b.radius = r;
        out.push_back(b);
      }
  } else if (n == 2) {
    int mphi = 2 * m;
    double wphi = 2.0 * M_PI / mphi;
    for (auto& [r, w] : rnodes)
      for (int k = 0; k < mphi; ++k) {
        double phi = wphi * k;
        BallNode b{};
        b.x[0] = r * std::cos(phi);
        b.x[1] = r * std::sin(phi);
        b.weight = w * wphi;
        b.radius = r;
        out.push_back(b);
      }
  } else {
    const GlRule& pol = gl_rule(m);
    int mphi = 2 * m;
    double wphi = 2.0 * M_PI / mphi;
    for (auto& [r, w] : rnodes)
      for (int i = 0; i < m; ++i) {
        double ct = pol.nodes[i], st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        for (int k = 0; k < mphi; ++k) {
          double phi = wphi * k;
          BallNode b{};
          b.x[0] = r * st * std::cos(phi);
          b.x[1] = r * st * std::sin(phi);
          b.x[2] = r * ct;
          b.weight = w * pol.weights[i] * wphi;
          b.radius = r;
          out.push_back(b);
        }
      }
  }
  return out;
}

}  // namespace lplab
