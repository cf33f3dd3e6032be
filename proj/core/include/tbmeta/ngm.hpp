#pragma once

#include "tbmeta/dynamics.hpp"
#include "tbmeta/netgen.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tbmeta {

/// Disease-free equilibrium of the uncorrelated closure (same for both incidence kinds).
MetapopState dfe(const Params& p, const DegreeDistribution& dist);

/// rho0_S,k = Lambda/(mu+D_S) (1 + (D_S/mu) k/<k>)
Vector dfe_susceptible(const Params& p, const DegreeDistribution& dist);

/// New-infection and transfer matrices over the infected compartments [E; I; R].
struct FvPair {
  Matrix F;
  Matrix V;
};

FvPair assemble_fv(const Params& p, const DegreeDistribution& dist, IncidenceKind kind);

/// The scalar chain that writes V^{-1} and the next-generation matrix as a I + b C,
/// the original closed-form chain, term by term.
struct NgmCoefficients {
  double A_E, A_I, A_R;
  double a, b;
  double a0, b0, a1, b1, a2, b2, a3, b3, a4, b4, a5, b5, a6, b6, a7, b7, a8, b8;
  bool a_exceeds_b;
};

/// Throws NumericalError naming the vanishing denominator.
NgmCoefficients ngm_coefficients(const Params& p);

/// Exact a8, b8 obtained by splitting V on the two eigenspaces of C (C = 0 and C = 1).
/// m0 = [(1-q) W_IE + q W_II] on the kernel of C, m1 on the range, with W the 3x3 inverse.
struct ModalCoefficients {
  double m0, m1;
  double a8, b8;  // a8 = m0, b8 = m1 - m0
};

ModalCoefficients modal_coefficients(const Params& p);

enum class R0Method { ClosedForm, NumericNgm, PowerIterationL };
std::string_view to_string(R0Method m);

/// Which (a8, b8) pair feeds the structured formulas.
enum class CoefficientSource { Printed, Modal };

struct R0Bounds {
  double lower, upper;
};

struct Certificate {
  bool holds;
  double margin;  // positive when the condition holds
};

struct InstabilityCertificates {
  Certificate i;    // beta a8 Lambda (mu <k> + D_S k_max) / (mu <k> (mu + D_S)) > 1
  Certificate ii;   // rho0_S,kmax > 1/(beta a8)
  Certificate iii;  // rho0_S,kmin > (1/a8)[1/beta - b8 sum_k rho0_S,k k p(k)/<k>]
  bool any() const noexcept { return i.holds || ii.holds || iii.holds; }
};

/// Printed closed form against the matrix-level value.
struct ClosedFormDiscrepancy {
  double printed;     // printed chain: beta (a8 + b8), or rho(L) with printed a8, b8 for mass action
  double exact;       // same formula with modal_coefficients
  double numeric;     // rho(F V^-1)
  double relative_error;        // |printed - numeric| / numeric
  double exact_relative_error;  // |exact - numeric| / numeric
  bool agrees;                  // relative_error <= kClosedFormTol
  std::string note;
};

inline constexpr double kClosedFormTol = 1e-6;

struct InterlacingCheck {
  bool holds;
  bool real_simple_positive;
  std::vector<double> eigenvalues;  // sorted ascending
  std::vector<double> diagonal;     // beta a8 S0_k, sorted ascending
};

struct R0Report {
  double value = 0.0;
  R0Method method = R0Method::NumericNgm;
  std::optional<R0Bounds> bounds;
  std::optional<InstabilityCertificates> certificates;
  std::optional<ClosedFormDiscrepancy> discrepancy;
  std::optional<InterlacingCheck> interlacing;
  bool power_fallback = false;
};

/// beta (a8 + b8) with the printed chain.
R0Report r0_closed_form_freq(const Params& p);

/// rho(F V^-1) by the dense eigensolver. Throws SingularMatrixError when V is singular.
R0Report r0_numeric(const Params& p, const DegreeDistribution& dist, IncidenceKind kind);

/// rho(L) with L = beta (a8 diag(S0) + b8 diag(S0) C), by power iteration, plus interlacing.
R0Report r0_mass_structured(const Params& p, const DegreeDistribution& dist,
                            CoefficientSource source = CoefficientSource::Modal);

R0Bounds r0_bounds_mass(const Params& p, const DegreeDistribution& dist,
                        CoefficientSource source = CoefficientSource::Modal);

InstabilityCertificates instability_certificates(const Params& p, const DegreeDistribution& dist,
                                                 CoefficientSource source = CoefficientSource::Modal);

/// Printed closed form vs rho(F V^-1).
ClosedFormDiscrepancy closed_form_discrepancy(const Params& p, const DegreeDistribution& dist,
                                              IncidenceKind kind = IncidenceKind::StandardIncidence);

InterlacingCheck check_interlacing(const Matrix& l, const Vector& diagonal);

struct StabilityResult {
  double abscissa;  // max real part of the Jacobian spectrum at the DFE
  bool stable;
};

StabilityResult dfe_jacobian_stability(const Params& p, const DegreeDistribution& dist,
                                       IncidenceKind kind);

/// Central finite-difference Jacobian of ModelRhs, for cross-checking rhs_jacobian.
Matrix finite_difference_jacobian(const ModelRhs& rhs, const Vector& y, double rel_step = 1e-6);

double spectral_abscissa(const Matrix& m);

}  // namespace tbmeta
