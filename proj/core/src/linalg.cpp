#include "tbmeta/linalg.hpp"

#include "tbmeta/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace tbmeta {

namespace {

void require_square(const Matrix& m, const char* name) {
  if (m.rows() != m.cols()) {
    throw ValidationError(std::string(name) + " must be square");
  }
}

double norm_inf(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace

Matrix Block2x2::assemble() const {
  Matrix out(n1.rows() + n3.rows(), n1.cols() + n2.cols());
  out << n1, n2, n3, n4;
  return out;
}

double rcond_estimate(const Matrix& m) {
  if (m.size() == 0) return 1.0;
  if (!m.allFinite()) return 0.0;
  Eigen::PartialPivLU<Matrix> lu(m);
  // PartialPivLU does not flag exact zero pivots; catch them before trusting rcond().
  const auto diag = lu.matrixLU().diagonal().cwiseAbs();
  if (diag.minCoeff() <= std::numeric_limits<double>::min() * m.rows()) return 0.0;
  return lu.rcond();
}

Matrix checked_inverse(const Matrix& m, const char* name) {
  require_square(m, name);
  const double rc = rcond_estimate(m);
  if (!(rc > kSingularRcond)) throw SingularMatrixError(name, rc);
  return m.partialPivLu().inverse();
}

Matrix block_2x2_inverse(const Block2x2& b) {
  require_square(b.n1, "N1");
  require_square(b.n4, "N4");
  if (b.n2.rows() != b.n1.rows() || b.n2.cols() != b.n4.cols() || b.n3.rows() != b.n4.rows() ||
      b.n3.cols() != b.n1.cols()) {
    throw ValidationError("off-diagonal blocks are not conformable with N1 and N4");
  }
  const Matrix n1_inv = checked_inverse(b.n1, "N1");
  const Matrix schur = b.n4 - b.n3 * n1_inv * b.n2;
  const Matrix d_inv = checked_inverse(schur, "Schur complement");

  const Matrix n1_inv_n2_dinv = n1_inv * b.n2 * d_inv;
  const Matrix dinv_n3_n1inv = d_inv * b.n3 * n1_inv;
  Block2x2 inv{n1_inv + n1_inv_n2_dinv * b.n3 * n1_inv, -n1_inv_n2_dinv, -dinv_n3_n1inv, d_inv};
  return inv.assemble();
}

Matrix rank_one_update_inverse(const Matrix& u, const Matrix& x, const Matrix& w, const Matrix& z) {
  require_square(u, "U");
  require_square(w, "W");
  if (x.rows() != u.rows() || x.cols() != w.rows() || z.rows() != w.rows() || z.cols() != u.cols()) {
    throw ValidationError("X must be n x m and Z m x n for U n x n and W m x m");
  }
  const Matrix u_inv = checked_inverse(u, "U");
  const Matrix w_inv = checked_inverse(w, "W");
  const Matrix core = w_inv + z * u_inv * x;
  const Matrix core_inv = checked_inverse(core, "core");
  return u_inv - u_inv * x * core_inv * z * u_inv;
}

BlockSpectralRadius block_spectral_radius(const Matrix& m1, const Matrix& m2, const Matrix& m3,
                                          const Matrix& m4) {
  for (const Matrix* m : {&m1, &m2, &m3, &m4}) require_square(*m, "block");
  const auto n = m1.rows();
  if (m2.rows() != n || m3.rows() != n || m4.rows() != n) {
    throw ValidationError("blocks must share one dimension");
  }
  const double rc = rcond_estimate(m2);
  if (!(rc > kSingularRcond)) {
    throw HypothesisViolation("M2 is not invertible (rcond " + std::to_string(rc) + ")",
                              std::numeric_limits<double>::infinity(),
                              std::numeric_limits<double>::infinity());
  }
  const Matrix m2_inv = m2.partialPivLu().inverse();
  const Matrix conj = m2 * m4 * m2_inv;
  const double tiny = std::numeric_limits<double>::min();

  const double conj_scale =
      std::max({norm_inf(m2) * norm_inf(m3), norm_inf(m2) * norm_inf(m4), norm_inf(m4) * norm_inf(m1), tiny});
  const double conj_res = norm_inf(m2 * m3 - conj * m1) / conj_scale;
  const double comm_scale = std::max(norm_inf(m2) * norm_inf(m4), tiny);
  const double comm_res = norm_inf(m2 * m4 - m4 * m2) / comm_scale;

  if (conj_res > 1e-8) {
    std::ostringstream os;
    os << "M2 M3 - M2 M4 M2^-1 M1 does not vanish (relative residual " << conj_res << ")";
    throw HypothesisViolation(os.str(), conj_res, comm_res);
  }

  const double general = std::max(0.0, dense_spectral_radius(m1 + conj));
  BlockSpectralRadius out{general, false, conj_res, comm_res};
  if (comm_res <= 1e-8) {
    out.commuting = true;
    const double reduced = std::max(0.0, dense_spectral_radius(m1 + m4));
    if (std::abs(reduced - general) > 1e-8 * std::max(1.0, general)) {
      std::ostringstream os;
      os << "reduced and general branches disagree: " << reduced << " vs " << general;
      throw NumericalError(os.str());
    }
  }
  return out;
}

PowerIterationResult spectral_radius_power_iteration(const Matrix& m, double tol, int max_iter) {
  require_square(m, "M");
  if (!m.allFinite()) throw ValidationError("matrix has non-finite entries");
  const auto n = m.rows();
  if (n == 0) return {0.0, 0, true, false};

  const auto fallback = [&](int iters) {
    return PowerIterationResult{dense_spectral_radius(m), iters, false, true};
  };
  if ((m.array() < 0.0).any()) return fallback(0);

  Vector x = Vector::Ones(n);
  Vector y(n);
  for (int it = 1; it <= max_iter; ++it) {
    y.noalias() = m * x;
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = y[i] / x[i];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    if (hi == 0.0) return {0.0, it, true, false};
    if (hi - lo <= tol * hi) return {0.5 * (lo + hi), it, true, false};
    const double scale = y.maxCoeff();
    if (!(y.minCoeff() > 0.0) || !(scale > 0.0)) return fallback(it);
    x = y / scale;
  }
  return fallback(max_iter);
}

double dense_spectral_radius(const Matrix& m) {
  require_square(m, "M");
  if (!m.allFinite()) throw ValidationError("matrix has non-finite entries");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver did not converge");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::pair<double, double> column_sum_bounds(const Matrix& m) {
  require_square(m, "M");
  if ((m.array() < 0.0).any()) throw ValidationError("column sum bounds need a nonnegative matrix");
  const Vector sums = m.colwise().sum().transpose();
  return {sums.minCoeff(), sums.maxCoeff()};
}

}  // namespace tbmeta
