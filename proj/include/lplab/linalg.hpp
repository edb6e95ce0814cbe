#pragma once

// Small dense linear algebra for 1..3 spatial dimensions (capacity 4).
// Fixed-capacity Eigen types keep everything on the stack; dimension is a
// runtime value so one binary serves flat(1..3), sphere(2..3), cigar(2).

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>

namespace lplab {

inline constexpr int kMaxDim = 4;

using VecN = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using MatN = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

// Embedding-space vectors for the sphere atlas (dimension n+1).
using VecE = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1>;
using MatE = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim + 1>;

// ODE state [x; u] plus room for a co-integrated variation bundle.
inline constexpr int kMaxState = 2 * kMaxDim + 2 * kMaxDim * kMaxDim;
using StateVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxState, 1>;

// Christoffel symbols Gamma^k_{ij}, stored [k][i][j], symmetric in (i,j).
struct Ten3 {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim> a{};

  double& at(int k, int i, int j) { return a[(k * kMaxDim + i) * kMaxDim + j]; }
  double at(int k, int i, int j) const { return a[(k * kMaxDim + i) * kMaxDim + j]; }

  void set_zero(int dim) {
    n = dim;
    a.fill(0.0);
  }

  // Gamma(u, v)^k = Gamma^k_{ij} u^i v^j
  VecN contract(const VecN& u, const VecN& v) const {
    VecN out = VecN::Zero(n);
    for (int k = 0; k < n; ++k) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) s += at(k, i, j) * u[i] * v[j];
      out[k] = s;
    }
    return out;
  }

  // Matrix (Gamma u)^k_j = Gamma^k_{ij} u^i, the velocity coupling of a linearized flow.
  MatN contract_left(const VecN& u) const {
    MatN out = MatN::Zero(n, n);
    for (int k = 0; k < n; ++k)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += at(k, i, j) * u[i];
        out(k, j) = s;
      }
    return out;
  }
};

// Curvature tensor in (1,3) form, stored riem(l, i, j, k) so that
// (R(u, v) w)^l = riem(l, i, j, k) u^i v^j w^k.
struct Ten4 {
  int n = 0;
  std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> a{};

  double& at(int l, int i, int j, int k) {
    return a[((l * kMaxDim + i) * kMaxDim + j) * kMaxDim + k];
  }
  double at(int l, int i, int j, int k) const {
    return a[((l * kMaxDim + i) * kMaxDim + j) * kMaxDim + k];
  }

  void set_zero(int dim) {
    n = dim;
    a.fill(0.0);
  }

  VecN apply(const VecN& u, const VecN& v, const VecN& w) const {
    VecN out = VecN::Zero(n);
    for (int l = 0; l < n; ++l) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < n; ++k) s += at(l, i, j, k) * u[i] * v[j] * w[k];
      out[l] = s;
    }
    return out;
  }
};

inline double inner(const MatN& g, const VecN& u, const VecN& v) { return u.dot(g * v); }

inline double norm_g(const MatN& g, const VecN& u) {
  double q = inner(g, u, u);
  // tiny negative values from roundoff are clamped; a real negative norm means a
  // broken metric and is caught by the jet validators instead
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

// Largest |eigenvalue| of g^{-1} S for symmetric S: the operator norm of a
// bilinear form measured by g.
inline double operator_norm(const MatN& g, const MatN& s) {
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(
      Eigen::MatrixXd(s), Eigen::MatrixXd(g), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("operator_norm: eigensolver failed");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double det_spd(const MatN& g) {
  double d = g.determinant();
  if (!(d > 0.0)) throw std::runtime_error("metric determinant not positive");
  return d;
}

// Deterministic pairwise reduction; the result depends only on element order,
// not on how work was scheduled across threads.
inline double pairwise_sum(const std::vector<double>& xs, size_t lo, size_t hi) {
  size_t len = hi - lo;
  if (len == 0) return 0.0;
  if (len <= 8) {
    double s = 0.0;
    for (size_t i = lo; i < hi; ++i) s += xs[i];
    return s;
  }
  size_t mid = lo + len / 2;
  return pairwise_sum(xs, lo, mid) + pairwise_sum(xs, mid, hi);
}

inline double pairwise_sum(const std::vector<double>& xs) { return pairwise_sum(xs, 0, xs.size()); }

}  // namespace lplab
