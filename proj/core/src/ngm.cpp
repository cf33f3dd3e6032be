#include "tbmeta/ngm.hpp"

#include "tbmeta/errors.hpp"
#include "tbmeta/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tbmeta {

Vector dfe_susceptible(const Params& p, const DegreeDistribution& dist) {
  p.validate();
  const Vector k = dist.degree_vector();
  return (p.lambda / (p.mu + p.D_S)) *
         (Vector::Ones(k.size()) + (p.D_S / p.mu) * k / dist.mean_degree());
}

MetapopState dfe(const Params& p, const DegreeDistribution& dist) {
  MetapopState s(static_cast<Eigen::Index>(dist.size()));
  s.S = dfe_susceptible(p, dist);
  return s;
}

FvPair assemble_fv(const Params& p, const DegreeDistribution& dist, IncidenceKind kind) {
  p.validate();
  const auto n = static_cast<Eigen::Index>(dist.size());
  const Matrix c = uncorrelated_connectivity(dist);
  const Matrix id = Matrix::Identity(n, n);
  FvPair out{Matrix::Zero(3 * n, 3 * n), Matrix::Zero(3 * n, 3 * n)};

  Matrix& V = out.V;
  V.block(0, 0, n, n) = p.removal_E() * id - p.D_E * c;
  V.block(0, n, n, n) = -p.gamma * id;
  V.block(n, 0, n, n) = -p.progression() * id;
  V.block(n, n, n, n) = p.removal_I() * id - p.D_I * c;
  V.block(n, 2 * n, n, n) = -p.xi * id;
  V.block(2 * n, 0, n, n) = -p.eta * id;
  V.block(2 * n, n, n, n) = -p.delta * id;
  V.block(2 * n, 2 * n, n, n) = p.removal_R() * id - p.D_R * c;

  Matrix scale = id;
  if (kind == IncidenceKind::MassAction) scale = dfe_susceptible(p, dist).asDiagonal();
  out.F.block(0, n, n, n) = p.beta * (1.0 - p.q) * scale;
  out.F.block(n, n, n, n) = p.beta * p.q * scale;
  return out;
}

namespace {

double checked_div(double num, double den, const char* what) {
  if (den == 0.0 || !std::isfinite(den)) {
    throw NumericalError(std::string("degenerate denominator: ") + what + " vanishes");
  }
  return num / den;
}

}  // namespace

NgmCoefficients ngm_coefficients(const Params& p) {
  p.validate();
  NgmCoefficients c{};
  const double mu = p.mu, eta = p.eta, ap = p.progression(), q = p.q;
  const double DE = p.D_E, DI = p.D_I, DR = p.D_R;
  const double g = p.gamma, de = p.delta, xi = p.xi;
  c.A_E = p.removal_E();
  c.A_I = p.removal_I();
  c.A_R = p.removal_R();
  const double AE = c.A_E, AI = c.A_I, AR = c.A_R;

  c.a = checked_div(AI * (mu + eta + DE) + ap * (mu + p.d + de + DI), AE, "A_E");
  c.b = checked_div(AE * DI * (mu + eta + ap) + g * ap * DE, AE * (mu + eta + ap),
                    "A_E (mu + eta + alpha(1 - theta))");
  const double a = c.a, b = c.b;
  c.a_exceeds_b = a > b;

  const double m_ap = mu + ap;  // b1..b3 use mu + ap, not mu + eta + ap
  c.a0 = checked_div(1.0, a, "a");
  c.b0 = checked_div(b, a * (a - b), "a (a - b)");
  const double r = checked_div(b * m_ap + a * DE, (a - b) * m_ap, "(a - b)(mu + alpha(1 - theta))");
  c.a1 = checked_div(ap, a * AE, "a A_E");
  c.b1 = c.a1 * r;
  c.a2 = 1.0 / (a * AE);
  c.b2 = c.a2 * r;
  const double aAE_gap = a * AE + g * ap;
  c.a3 = aAE_gap / (a * AE * AE);
  c.b3 = c.a3 * checked_div(g * ap * AE * (b * m_ap + a * DE) + (a - b) * DE * m_ap * aAE_gap,
                            (a - b) * aAE_gap * m_ap * m_ap,
                            "(a - b)(a A_E + gamma alpha(1 - theta))(mu + alpha(1 - theta))^2");

  const double den = AR - xi * (eta * c.a3 + de * c.a1);
  const double num = DR + xi * (eta * c.b3 + de * c.b1);
  c.a4 = checked_div(1.0, den, "A_R - xi (eta a3 + delta a1)");
  c.b4 = c.a4 * checked_div(num, den - num, "D^{-1} core denominator");

  c.a5 = ((1 - q) * ap + q * AE) / (a * AE);
  c.b5 = checked_div((1 - q) * ap * (a * DE + b * (AE - DE)) + q * b * AE * (AE - DE),
                     a * (a - b) * AE * (AE - DE), "a (a - b) A_E (A_E - D_E)");
  c.a6 = 1.0 + xi * de * c.a0 * c.a4;
  c.b6 = xi * de * (c.a0 * c.b4 + c.b0 * c.a4 + c.b0 * c.b4);
  const double s_a = (1 - q) * c.a3 + q * c.a2;
  const double s_b = (1 - q) * c.b3 + q * c.b2;
  c.a7 = (c.a6 - 1.0) * s_a;
  c.b7 = (c.a6 - 1.0) * s_b + c.b6 * s_a + c.b6 * s_b;
  c.a8 = c.a5 * c.a6 + c.a7;
  c.b8 = c.a5 * c.b6 + c.b5 * c.a6 + c.b5 * c.b6 + c.b7;
  return c;
}

ModalCoefficients modal_coefficients(const Params& p) {
  p.validate();
  const double ap = p.progression();
  auto mode = [&](double c) {
    const double e = p.mu + p.eta + ap + p.D_E * (1.0 - c);
    const double i = p.mu + p.d + p.gamma + p.delta + p.D_I * (1.0 - c);
    const double r = p.mu + p.xi + p.D_R * (1.0 - c);
    const double det = e * (i * r - p.xi * p.delta) - p.gamma * (ap * r + p.xi * p.eta);
    // Cramer's rule for the I row of the 3x3 inverse: W_IE = (ap r + xi eta)/det, W_II = e r/det.
    return checked_div((1.0 - p.q) * (ap * r + p.xi * p.eta) + p.q * e * r, det, "det V_c");
  };
  ModalCoefficients m{};
  m.m0 = mode(0.0);
  m.m1 = mode(1.0);
  m.a8 = m.m0;
  m.b8 = m.m1 - m.m0;
  return m;
}

std::string_view to_string(R0Method m) {
  switch (m) {
    case R0Method::ClosedForm: return "ClosedForm";
    case R0Method::NumericNgm: return "NumericNgm";
    case R0Method::PowerIterationL: return "PowerIterationL";
  }
  return "?";
}

namespace {

std::pair<double, double> coefficients(const Params& p, CoefficientSource source) {
  if (source == CoefficientSource::Printed) {
    const auto c = ngm_coefficients(p);
    return {c.a8, c.b8};
  }
  const auto m = modal_coefficients(p);
  return {m.a8, m.b8};
}

double relative_gap(double x, double ref) {
  const double scale = std::abs(ref) > 0.0 ? std::abs(ref) : 1.0;
  return std::abs(x - ref) / scale;
}

}  // namespace

R0Report r0_closed_form_freq(const Params& p) {
  const auto c = ngm_coefficients(p);
  R0Report r;
  r.method = R0Method::ClosedForm;
  r.value = p.beta * (c.a8 + c.b8);
  return r;
}

R0Report r0_numeric(const Params& p, const DegreeDistribution& dist, IncidenceKind kind) {
  const auto fv = assemble_fv(p, dist, kind);
  R0Report r;
  r.method = R0Method::NumericNgm;
  if (p.beta == 0.0) return r;
  r.value = dense_spectral_radius(fv.F * checked_inverse(fv.V, "V"));
  return r;
}

InterlacingCheck check_interlacing(const Matrix& l, const Vector& diagonal) {
  InterlacingCheck out{};
  Eigen::EigenSolver<Matrix> es(l, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on L");
  const auto ev = es.eigenvalues();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) scale = std::max(scale, std::abs(ev[i]));
  out.real_simple_positive = true;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i].imag()) > 1e-10 * scale) out.real_simple_positive = false;
    out.eigenvalues.push_back(ev[i].real());
  }
  out.diagonal.assign(diagonal.data(), diagonal.data() + diagonal.size());
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  std::sort(out.diagonal.begin(), out.diagonal.end());
  for (std::size_t i = 0; i < out.eigenvalues.size(); ++i) {
    if (!(out.eigenvalues[i] > 0.0)) out.real_simple_positive = false;
    if (i > 0 && !(out.eigenvalues[i] > out.eigenvalues[i - 1])) out.real_simple_positive = false;
  }
  out.holds = out.real_simple_positive && out.eigenvalues.size() == out.diagonal.size();
  for (std::size_t i = 0; out.holds && i < out.diagonal.size(); ++i) {
    const bool above = out.diagonal[i] < out.eigenvalues[i];
    const bool below = i + 1 == out.diagonal.size() || out.eigenvalues[i] < out.diagonal[i + 1];
    out.holds = above && below;
  }
  return out;
}

R0Report r0_mass_structured(const Params& p, const DegreeDistribution& dist, CoefficientSource source) {
  const auto [a8, b8] = coefficients(p, source);
  const Vector s0 = dfe_susceptible(p, dist);
  const Matrix c = uncorrelated_connectivity(dist);
  const Matrix l = p.beta * (a8 * Matrix(s0.asDiagonal()) + b8 * s0.asDiagonal() * c);

  R0Report r;
  r.method = R0Method::PowerIterationL;
  if (p.beta == 0.0) return r;
  const bool nonnegative = (l.array() >= 0.0).all();
  if (nonnegative) {
    const auto pi = spectral_radius_power_iteration(l);
    r.value = pi.value;
    r.power_fallback = pi.used_fallback;
  } else {
    r.value = dense_spectral_radius(l);
    r.power_fallback = true;
  }
  r.interlacing = check_interlacing(l, p.beta * a8 * s0);
  r.bounds = r0_bounds_mass(p, dist, source);
  return r;
}

R0Bounds r0_bounds_mass(const Params& p, const DegreeDistribution& dist, CoefficientSource source) {
  const auto [a8, b8] = coefficients(p, source);
  const Vector s0 = dfe_susceptible(p, dist);
  const Vector w = dist.degree_vector().cwiseProduct(dist.prob_vector()) / dist.mean_degree();
  CompensatedSum mix;
  for (Eigen::Index i = 0; i < s0.size(); ++i) mix.add(s0[i] * w[i]);
  const double coupled = b8 * mix.value();
  return {p.beta * (a8 * s0.minCoeff() + coupled), p.beta * (a8 * s0.maxCoeff() + coupled)};
}

InstabilityCertificates instability_certificates(const Params& p, const DegreeDistribution& dist,
                                                 CoefficientSource source) {
  const auto [a8, b8] = coefficients(p, source);
  const Vector s0 = dfe_susceptible(p, dist);
  const double kbar = dist.mean_degree();
  const double inf = std::numeric_limits<double>::infinity();
  InstabilityCertificates out{};

  const double lhs =
      p.beta * a8 * p.lambda * (p.mu * kbar + p.D_S * dist.k_max()) / (p.mu * kbar * (p.mu + p.D_S));
  out.i = {lhs > 1.0, lhs - 1.0};

  const double s_max = s0[s0.size() - 1];
  const double threshold_ii = p.beta * a8 > 0.0 ? 1.0 / (p.beta * a8) : inf;
  out.ii = {s_max > threshold_ii, s_max - threshold_ii};

  CompensatedSum mix;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    mix.add(s0[static_cast<Eigen::Index>(i)] * dist.degree(i) * dist.prob(i) / kbar);
  }
  const double threshold_iii = p.beta > 0.0 && a8 > 0.0 ? (1.0 / p.beta - b8 * mix.value()) / a8 : inf;
  out.iii = {s0[0] > threshold_iii, s0[0] - threshold_iii};
  return out;
}

ClosedFormDiscrepancy closed_form_discrepancy(const Params& p, const DegreeDistribution& dist,
                                              IncidenceKind kind) {
  ClosedFormDiscrepancy d{};
  if (kind == IncidenceKind::StandardIncidence) {
    d.printed = r0_closed_form_freq(p).value;
    const auto m = modal_coefficients(p);
    d.exact = p.beta * (m.a8 + m.b8);
  } else {
    d.printed = r0_mass_structured(p, dist, CoefficientSource::Printed).value;
    d.exact = r0_mass_structured(p, dist, CoefficientSource::Modal).value;
  }
  d.numeric = r0_numeric(p, dist, kind).value;
  d.relative_error = relative_gap(d.printed, d.numeric);
  d.exact_relative_error = relative_gap(d.exact, d.numeric);
  d.agrees = d.relative_error <= kClosedFormTol;
  if (d.agrees) {
    d.note = "printed coefficient chain agrees with rho(F V^-1)";
  } else {
    d.note = "printed coefficient chain disagrees with rho(F V^-1); numeric value is authoritative";
    if (d.exact_relative_error <= kClosedFormTol) {
      d.note += "; eigenspace-split coefficients reproduce the numeric value";
    }
  }
  return d;
}

double spectral_abscissa(const Matrix& m) {
  if (!m.allFinite()) throw ValidationError("matrix has non-finite entries");
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  return es.eigenvalues().real().maxCoeff();
}

StabilityResult dfe_jacobian_stability(const Params& p, const DegreeDistribution& dist,
                                       IncidenceKind kind) {
  const MetapopState x0 = dfe(p, dist);
  const Matrix j = rhs_jacobian(x0, p, uncorrelated_connectivity(dist), {kind, true});
  StabilityResult out{};
  out.abscissa = spectral_abscissa(j);
  out.stable = out.abscissa < 0.0;
  return out;
}

Matrix finite_difference_jacobian(const ModelRhs& rhs, const Vector& y, double rel_step) {
  const auto m = y.size();
  Matrix j(m, m);
  Vector yp = y, ym = y, fp, fm;
  for (Eigen::Index c = 0; c < m; ++c) {
    const double h = rel_step * std::max(1.0, std::abs(y[c]));
    yp[c] = y[c] + h;
    // Stay inside the nonnegative orthant: one-sided difference at the boundary.
    const bool central = y[c] - h >= 0.0;
    ym[c] = central ? y[c] - h : y[c];
    rhs.evaluate(yp, fp);
    rhs.evaluate(ym, fm);
    j.col(c) = (fp - fm) / (central ? 2.0 * h : h);
    yp[c] = y[c];
    ym[c] = y[c];
  }
  return j;
}

}  // namespace tbmeta
