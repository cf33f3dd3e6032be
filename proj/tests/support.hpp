#pragma once

// Test-side oracles and random draws. Nothing here calls into the library's numerics:
// matrices are assembled from the model definition directly and solved with plain Eigen.

#include <tbmeta/dynamics.hpp>
#include <tbmeta/netgen.hpp>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <set>
#include <vector>

namespace oracle {

using tbmeta::Matrix;
using tbmeta::Vector;

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int a, int b) {
  return std::uniform_int_distribution<int>(a, b)(rng);
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline double rel_gap(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Sorted distinct degrees and random positive probabilities summing to 1.
inline tbmeta::DegreeDistribution random_network(std::mt19937_64& rng, int n, int k_hi = 500) {
  std::set<int> ks;
  while (static_cast<int>(ks.size()) < n) ks.insert(uniform_int(rng, 1, k_hi));
  std::vector<double> w(static_cast<std::size_t>(n));
  double total = 0.0;
  for (auto& x : w) total += (x = uniform(rng, 0.05, 1.0));
  for (auto& x : w) x /= total;
  // push the rounding residue into the largest weight
  double s = 0.0;
  for (double x : w) s += x;
  *std::max_element(w.begin(), w.end()) += 1.0 - s;
  return tbmeta::DegreeDistribution::create(std::vector<int>(ks.begin(), ks.end()), w);
}

/// p(k) ~ k^-e on [k_min, k_max], normalized in long double.
inline std::vector<double> power_law_probs(double e, int k_min, int k_max) {
  long double z = 0.0L;
  for (int k = k_min; k <= k_max; ++k) z += std::pow(static_cast<long double>(k), -static_cast<long double>(e));
  std::vector<double> p;
  for (int k = k_min; k <= k_max; ++k) {
    p.push_back(static_cast<double>(std::pow(static_cast<long double>(k), -static_cast<long double>(e)) / z));
  }
  return p;
}

inline Vector degrees(const tbmeta::DegreeDistribution& d) {
  Vector k(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) k[static_cast<Eigen::Index>(i)] = d.degree(i);
  return k;
}

inline Vector probs(const tbmeta::DegreeDistribution& d) {
  Vector p(static_cast<Eigen::Index>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) p[static_cast<Eigen::Index>(i)] = d.prob(i);
  return p;
}

/// C = k p^T / <k>
inline Matrix connectivity(const tbmeta::DegreeDistribution& d) {
  const Vector k = degrees(d), p = probs(d);
  return k * p.transpose() / k.dot(p);
}

/// Solves [(mu + D_S) I - D_S C] S = Lambda 1 directly.
inline Vector dfe_s(const tbmeta::Params& p, const tbmeta::DegreeDistribution& d) {
  const auto n = static_cast<Eigen::Index>(d.size());
  const Matrix a = (p.mu + p.D_S) * Matrix::Identity(n, n) - p.D_S * connectivity(d);
  return a.fullPivLu().solve(Vector::Constant(n, p.lambda));
}

struct Fv {
  Matrix F, V;
};

inline Fv fv(const tbmeta::Params& p, const tbmeta::DegreeDistribution& d, bool mass) {
  const auto n = static_cast<Eigen::Index>(d.size());
  const Matrix I = Matrix::Identity(n, n), C = connectivity(d), Z = Matrix::Zero(n, n);
  const double ap = p.alpha * (1 - p.theta);
  const double AE = p.mu + p.eta + ap + p.D_E, AI = p.mu + p.d + p.gamma + p.delta + p.D_I,
               AR = p.mu + p.xi + p.D_R;
  Fv out{Matrix::Zero(3 * n, 3 * n), Matrix(3 * n, 3 * n)};
  out.V << AE * I - p.D_E * C, -p.gamma * I, Z, -ap * I, AI * I - p.D_I * C, -p.xi * I, -p.eta * I,
      -p.delta * I, AR * I - p.D_R * C;
  const Matrix s = mass ? Matrix(dfe_s(p, d).asDiagonal()) : I;
  out.F.block(0, n, n, n) = p.beta * (1 - p.q) * s;
  out.F.block(n, n, n, n) = p.beta * p.q * s;
  return out;
}

inline double spectral_radius(const Matrix& m) {
  Eigen::ComplexEigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double r0(const tbmeta::Params& p, const tbmeta::DegreeDistribution& d, bool mass) {
  const Fv m = fv(p, d, mass);
  return spectral_radius(m.F * m.V.fullPivLu().inverse());
}

/// 3 x 3 single-patch next-generation value beta [(1-q) W_IE + q W_II] with no diffusion.
inline double single_patch_r0(const tbmeta::Params& p) {
  const double ap = p.alpha * (1 - p.theta);
  Eigen::Matrix3d v;
  v << p.mu + p.eta + ap, -p.gamma, 0, -ap, p.mu + p.d + p.gamma + p.delta, -p.xi, -p.eta, -p.delta, p.mu + p.xi;
  const Eigen::Matrix3d w = v.inverse();
  return p.beta * ((1 - p.q) * w(1, 0) + p.q * w(1, 1));
}

/// Uncorrelated-closure RHS written out componentwise, packed [S; E; I; R].
inline Vector rhs(const tbmeta::Params& p, const tbmeta::DegreeDistribution& d, const Vector& y, bool mass,
                  bool reinfection = true) {
  const auto n = static_cast<Eigen::Index>(d.size());
  const Vector k = degrees(d), pk = probs(d);
  const double kbar = k.dot(pk);
  const Vector S = y.segment(0, n), E = y.segment(n, n), I = y.segment(2 * n, n), R = y.segment(3 * n, n);
  const double ap = p.alpha * (1 - p.theta);
  Vector out(4 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double N = S[i] + E[i] + I[i] + R[i];
    const double force = mass ? p.beta * I[i] : (N > 0 ? p.beta * I[i] / N : 0.0);
    const double inc = force * S[i];
    const double re = reinfection ? (1 - p.xi) * force * R[i] : 0.0;
    auto diff = [&](const Vector& X, double D) { return -D * (X[i] - k[i] / kbar * pk.dot(X)); };
    out[i] = p.lambda - inc - p.mu * S[i] + diff(S, p.D_S);
    out[n + i] = (1 - p.q) * inc + re + p.gamma * I[i] - (p.mu + p.eta + ap) * E[i] + diff(E, p.D_E);
    out[2 * n + i] = p.q * inc + ap * E[i] - (p.mu + p.d + p.gamma + p.delta) * I[i] + p.xi * R[i] + diff(I, p.D_I);
    out[3 * n + i] = -re + p.eta * E[i] + p.delta * I[i] - (p.mu + p.xi) * R[i] + diff(R, p.D_R);
  }
  return out;
}

/// Fast-rate parameter draw (rates of order 1 / year) on a small power-law network.
struct Draw {
  tbmeta::Params p;
  tbmeta::DegreeDistribution dist;
};

inline Draw generic_draw(std::mt19937_64& rng) {
  tbmeta::Params p;
  p.lambda = uniform(rng, 1, 10);
  p.mu = uniform(rng, 0.5, 2);
  p.q = uniform(rng, 0.1, 0.9);
  p.alpha = uniform(rng, 0.5, 5);
  p.theta = uniform(rng, 0, 0.5);
  p.delta = uniform(rng, 0.5, 5);
  p.eta = uniform(rng, 0.5, 5);
  p.gamma = uniform(rng, 0.1, 2);
  p.d = uniform(rng, 0, 0.5);
  p.xi = uniform(rng, 0, 1);
  p.D_S = uniform(rng, 0.1, 2);
  p.D_E = uniform(rng, 0.1, 2);
  p.D_I = uniform(rng, 0.1, 2);
  p.D_R = uniform(rng, 0.1, 2);
  p.beta = 1.0;
  const double e = uniform(rng, 2, 3.5);
  const int k_min = uniform_int(rng, 1, 3);
  const int k_max = uniform_int(rng, 4, 11);
  std::vector<int> ks;
  for (int k = k_min; k <= k_max; ++k) ks.push_back(k);
  auto pr = power_law_probs(e, k_min, k_max);
  double s = 0.0;
  for (double x : pr) s += x;
  pr[0] += 1.0 - s;
  return {p, tbmeta::DegreeDistribution::create(ks, pr)};
}

/// Rescales beta so that the oracle R0 equals target (R0 is linear in beta).
inline void set_r0(Draw& d, bool mass, double target) {
  d.p.beta = 1.0;
  d.p.beta = target / r0(d.p, d.dist, mass);
}

}  // namespace oracle
