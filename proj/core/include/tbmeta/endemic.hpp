#pragma once

#include "tbmeta/dynamics.hpp"
#include "tbmeta/netgen.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

namespace tbmeta {

/// Bordered form of the mass-action model without re-infection:
/// x' = Lambda 1 - diag(z) x + [D_S C - (mu + D_S) I] x,  y' = sum_i z_i x_i K_i - V y,  z = B y.
struct CompactForm {
  Matrix B;                // n x 3n, [0, beta I, 0]
  std::vector<Vector> K;   // K_i: 1 - q in slot i of the E block, q in slot i of the I block
};

CompactForm compact_form_vectors(const Params& p, const DegreeDistribution& dist);

/// P(z) = diag(z) - [D_S C - (mu + D_S) I]
Matrix p_matrix(const Vector& z, const Params& p, const DegreeDistribution& dist);

/// Closed-form inverse of P(z) (diagonal plus rank-one). Throws SingularMatrixError
/// when 1 - (D_S/<k>) sum_k k p(k)/(z_k + mu + D_S) vanishes.
Matrix p_inverse(const Vector& z, const Params& p, const DegreeDistribution& dist);

/// Shared pieces of the fixed-point map, assembled once per parameter set.
class EndemicSystem {
 public:
  EndemicSystem(const Params& p, const DegreeDistribution& dist);

  Eigen::Index size() const noexcept { return x0_.size(); }
  const Params& params() const noexcept { return p_; }
  const DegreeDistribution& dist() const noexcept { return dist_; }

  /// G = B V^{-1} [(1-q) I; q I; 0], so that z = G (x(z) o z) at an equilibrium.
  const Matrix& g() const noexcept { return g_; }
  /// V^{-1}
  const Matrix& v_inverse() const noexcept { return w_; }
  /// c_i = <sum_j e_j | B V^{-1} K_i>, the column sums of G.
  const Vector& column_weights() const noexcept { return colsum_; }
  /// x0 = S0, the susceptible DFE.
  const Vector& x0() const noexcept { return x0_; }

  /// x(z) = P^{-1}(z) Lambda 1 in O(n).
  Vector susceptible(const Vector& z) const;
  /// Right side of the vector fixed point.
  Vector phi(const Vector& z) const;
  /// y* = V^{-1} [(1-q) I; q I; 0] (x o z), stacked [E; I; R].
  Vector infected(const Vector& z, const Vector& x) const;

 private:
  Params p_;
  DegreeDistribution dist_;
  Matrix w_, g_;
  Vector colsum_, x0_, kp_;  // kp_ = k p(k) / <k>
};

/// H(z) = sum_i z_i x_i(z) c_i / sum_j z_j
double h_function(const Vector& z, const Params& p, const DegreeDistribution& dist);
double h_function(const Vector& z, const EndemicSystem& sys);

/// sum_i x0_i c_i, the z -> 0 limit in summed form.
double h_limit_zero(const Params& p, const DegreeDistribution& dist);

/// A = sum_i x0_i B V^{-1} K_i e_i^T = G diag(x0); its column sums add up to h_limit_zero.
Matrix h_limit_matrix(const Params& p, const DegreeDistribution& dist);

struct EndemicOptions {
  double damping = 0.5;
  double tol = 1e-10;
  int max_iter = 100000;
  /// A converged iterate with ||z||_inf below this is reported as collapsed to the DFE.
  double collapse_tol = 1e-8;
  /// Relative bound on the model RHS at the reconstructed equilibrium.
  double rhs_tol = 1e-6;
};

enum class EndemicStatus { Converged, Collapsed, NotConverged };
std::string_view to_string(EndemicStatus s);

inline constexpr double kIterateFloor = 1e-14;

struct EndemicSolution {
  EndemicStatus status = EndemicStatus::NotConverged;
  Vector z_star;
  Vector x_star;
  Vector y_star;          // [E; I; R]
  MetapopState state;     // (x*, E*, I*, R*)
  double residual = 0.0;  // ||Phi(z) - z||_inf at exit
  double h_value = 0.0;
  double rhs_residual = 0.0;  // ||f||_inf / max(Lambda, ||state||_inf), re-infection off
  bool rhs_ok = false;
  int iterations = 0;
  int floor_projections = 0;
  std::vector<double> residual_history;

  bool endemic() const noexcept { return status == EndemicStatus::Converged && rhs_ok; }
};

/// Damped iteration z <- (1 - damping) z + damping Phi(z). Throws ValidationError on a
/// non-positive start or options out of range.
EndemicSolution solve_endemic(const Params& p, const DegreeDistribution& dist, const Vector& init,
                              const EndemicOptions& options = {});
EndemicSolution solve_endemic(const EndemicSystem& sys, const Vector& init,
                              const EndemicOptions& options = {});

/// Starts sampled log-uniformly in [1e-4, 1] beta Lambda/mu per class. Returns the distinct
/// endemic solutions (relative distance > 1e-6), sorted by ||z*||_2.
std::vector<EndemicSolution> multi_start_scan(const Params& p, const DegreeDistribution& dist,
                                              int starts, std::uint64_t seed,
                                              const EndemicOptions& options = {});

struct HCurvePoint {
  double c;
  double h;
};

/// H(c 1) for c log-spaced in [c_min, c_max].
std::vector<HCurvePoint> h_curve(const Params& p, const DegreeDistribution& dist, double c_min,
                                 double c_max, int steps);

}  // namespace tbmeta
