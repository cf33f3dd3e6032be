#pragma once

#include "tbmeta/numeric.hpp"

#include <utility>

namespace tbmeta {

/// Reciprocal condition estimates below this are treated as singular.
inline constexpr double kSingularRcond = 1e-13;

/// [[n1, n2], [n3, n4]] with n1, n4 square.
struct Block2x2 {
  Matrix n1, n2, n3, n4;

  Matrix assemble() const;
};

/// Schur-complement inverse. Throws SingularMatrixError naming "N1" or "Schur complement".
Matrix block_2x2_inverse(const Block2x2& b);

/// (U + X W Z)^{-1} = U^{-1} - U^{-1} X [W^{-1} + Z U^{-1} X]^{-1} Z U^{-1}.
/// Throws SingularMatrixError naming "U", "W" or "core".
Matrix rank_one_update_inverse(const Matrix& u, const Matrix& x, const Matrix& w, const Matrix& z);

/// Inverse through partial-pivot LU with a singularity guard.
Matrix checked_inverse(const Matrix& m, const char* name);

/// Reciprocal condition number estimate (1-norm) from an LU factorization.
double rcond_estimate(const Matrix& m);

struct BlockSpectralRadius {
  double value;
  bool commuting;              // M2 M4 = M4 M2 held, reduced form also evaluated
  double conjugation_residual; // ||M2 M3 - M2 M4 M2^{-1} M1||, relative
  double commutation_residual; // ||M2 M4 - M4 M2||, relative
};

/// Spectral radius of [[M1, M2], [M3, M4]] through the n x n reduction
/// rho = max{0, rho(M1 + M2 M4 M2^{-1})}, and rho(M1 + M4) when M2 and M4 commute.
/// Requires M2 invertible and M2 M3 = M2 M4 M2^{-1} M1 (relative residual <= 1e-8);
/// otherwise throws HypothesisViolation.
BlockSpectralRadius block_spectral_radius(const Matrix& m1, const Matrix& m2, const Matrix& m3,
                                          const Matrix& m4);

struct PowerIterationResult {
  double value;
  int iterations;
  bool converged;      // Collatz-Wielandt bracket closed to tol
  bool used_fallback;  // dense eigensolver supplied the value
};

/// Perron root of a nonnegative matrix by power iteration from the all-ones vector.
/// Convergence is certified by the Collatz-Wielandt bracket min_i (Mx)_i/x_i <= rho <= max_i (Mx)_i/x_i;
/// if the bracket does not close within max_iter, the dense eigensolver value is returned.
PowerIterationResult spectral_radius_power_iteration(const Matrix& m, double tol = 1e-12,
                                                     int max_iter = 10000);

/// max |lambda_i| via a general dense eigensolver. Rejects non-finite entries.
double dense_spectral_radius(const Matrix& m);

/// (min_j r_j, max_j r_j) with r_j the j-th column sum. Rejects negative entries.
std::pair<double, double> column_sum_bounds(const Matrix& m);

}  // namespace tbmeta
