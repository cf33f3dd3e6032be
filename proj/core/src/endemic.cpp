#include "tbmeta/endemic.hpp"

#include "tbmeta/errors.hpp"
#include "tbmeta/linalg.hpp"
#include "tbmeta/ngm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace tbmeta {

CompactForm compact_form_vectors(const Params& p, const DegreeDistribution& dist) {
  const auto n = static_cast<Eigen::Index>(dist.size());
  CompactForm out;
  out.B = Matrix::Zero(n, 3 * n);
  out.B.block(0, n, n, n) = p.beta * Matrix::Identity(n, n);
  out.K.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector k = Vector::Zero(3 * n);
    k[i] = 1.0 - p.q;
    k[n + i] = p.q;
    out.K.push_back(std::move(k));
  }
  return out;
}

namespace {

void require_nonnegative(const Vector& z, const DegreeDistribution& dist) {
  if (static_cast<std::size_t>(z.size()) != dist.size()) {
    throw ValidationError("z has length " + std::to_string(z.size()) + ", expected " +
                          std::to_string(dist.size()));
  }
  if (!z.allFinite() || (z.array() < 0.0).any()) throw ValidationError("z must be finite and nonnegative");
}

}  // namespace

Matrix p_matrix(const Vector& z, const Params& p, const DegreeDistribution& dist) {
  require_nonnegative(z, dist);
  const auto n = z.size();
  Matrix m = (p.mu + p.D_S) * Matrix::Identity(n, n) - p.D_S * uncorrelated_connectivity(dist);
  m.diagonal() += z;
  return m;
}

Matrix p_inverse(const Vector& z, const Params& p, const DegreeDistribution& dist) {
  require_nonnegative(z, dist);
  p.validate();
  const Vector d = (z.array() + p.mu + p.D_S).inverse().matrix();
  const double kbar = dist.mean_degree();
  CompensatedSum s;
  for (std::size_t i = 0; i < dist.size(); ++i) s.add(dist.degree(i) * dist.prob(i) * d[static_cast<Eigen::Index>(i)]);
  const double core = 1.0 - p.D_S / kbar * s.value();
  if (std::abs(core) < kSingularRcond) throw SingularMatrixError("core", std::abs(core));
  const Matrix c = uncorrelated_connectivity(dist);
  const auto n = z.size();
  Matrix inner = Matrix::Identity(n, n) + (p.D_S / core) * c * d.asDiagonal();
  return d.asDiagonal() * inner;
}

EndemicSystem::EndemicSystem(const Params& p, const DegreeDistribution& dist) : p_(p), dist_(dist) {
  p_.validate();
  const auto n = static_cast<Eigen::Index>(dist_.size());
  const auto fv = assemble_fv(p_, dist_, IncidenceKind::MassAction);
  w_ = checked_inverse(fv.V, "V");
  g_ = p_.beta * ((1.0 - p_.q) * w_.block(n, 0, n, n) + p_.q * w_.block(n, n, n, n));
  colsum_ = g_.colwise().sum().transpose();
  x0_ = dfe_susceptible(p_, dist_);
  kp_ = dist_.degree_vector().cwiseProduct(dist_.prob_vector()) / dist_.mean_degree();
}

Vector EndemicSystem::susceptible(const Vector& z) const {
  // P(z) = diag(d)^{-1} - D_S k p^T/<k>; Sherman-Morrison applied to Lambda 1.
  const Vector d = (z.array() + p_.mu + p_.D_S).inverse().matrix();
  const Vector pd = dist_.prob_vector().cwiseProduct(d);
  CompensatedSum s, t;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    s.add(kp_[i] * d[i]);
    t.add(pd[i]);
  }
  const double core = 1.0 - p_.D_S * s.value();
  if (std::abs(core) < kSingularRcond) throw SingularMatrixError("core", std::abs(core));
  const double coupling = p_.D_S * t.value() / core / dist_.mean_degree();
  Vector x(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    x[i] = p_.lambda * d[i] * (1.0 + coupling * dist_.degree(static_cast<std::size_t>(i)));
  }
  return x;
}

Vector EndemicSystem::phi(const Vector& z) const { return g_ * susceptible(z).cwiseProduct(z); }

Vector EndemicSystem::infected(const Vector& z, const Vector& x) const {
  const auto n = size();
  const Vector inc = x.cwiseProduct(z);
  Vector k(3 * n);
  k << (1.0 - p_.q) * inc, p_.q * inc, Vector::Zero(n);
  return w_ * k;
}

double h_function(const Vector& z, const EndemicSystem& sys) {
  if (z.size() != sys.size()) throw ValidationError("z does not match the degree classes");
  if ((z.array() < 0.0).any()) throw ValidationError("z must be nonnegative");
  CompensatedSum total, num;
  const Vector x = sys.susceptible(z);
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    total.add(z[i]);
    num.add(z[i] * x[i] * sys.column_weights()[i]);
  }
  if (!(total.value() > 0.0)) throw ValidationError("H(z) needs sum_j z_j > 0");
  return num.value() / total.value();
}

double h_function(const Vector& z, const Params& p, const DegreeDistribution& dist) {
  require_nonnegative(z, dist);
  return h_function(z, EndemicSystem(p, dist));
}

double h_limit_zero(const Params& p, const DegreeDistribution& dist) {
  const EndemicSystem sys(p, dist);
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < sys.size(); ++i) acc.add(sys.x0()[i] * sys.column_weights()[i]);
  return acc.value();
}

Matrix h_limit_matrix(const Params& p, const DegreeDistribution& dist) {
  const auto cf = compact_form_vectors(p, dist);
  const auto fv = assemble_fv(p, dist, IncidenceKind::MassAction);
  const Matrix w = checked_inverse(fv.V, "V");
  const Vector x0 = dfe_susceptible(p, dist);
  const auto n = x0.size();
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a.col(i) += x0[i] * (cf.B * (w * cf.K[static_cast<std::size_t>(i)]));
  }
  return a;
}

std::string_view to_string(EndemicStatus s) {
  switch (s) {
    case EndemicStatus::Converged: return "converged";
    case EndemicStatus::Collapsed: return "collapsed";
    case EndemicStatus::NotConverged: return "not-converged";
  }
  return "?";
}

EndemicSolution solve_endemic(const Params& p, const DegreeDistribution& dist, const Vector& init,
                              const EndemicOptions& options) {
  return solve_endemic(EndemicSystem(p, dist), init, options);
}

EndemicSolution solve_endemic(const EndemicSystem& sys, const Vector& init, const EndemicOptions& options) {
  std::vector<std::string> bad;
  if (!(options.damping > 0.0 && options.damping <= 1.0)) bad.push_back("damping must lie in (0, 1]");
  if (!(options.tol > 0.0)) bad.push_back("tol must be positive");
  if (options.max_iter < 1) bad.push_back("max_iter must be at least 1");
  if (init.size() != sys.size()) bad.push_back("initial vector has the wrong length");
  else if (!init.allFinite() || (init.array() <= 0.0).any()) bad.push_back("initial vector must be positive");
  if (!bad.empty()) throw ValidationError(std::move(bad));

  EndemicSolution out;
  Vector z = init;
  for (int it = 0; it < options.max_iter; ++it) {
    const Vector f = sys.phi(z);
    const double r = (f - z).lpNorm<Eigen::Infinity>();
    out.residual_history.push_back(r);
    out.residual = r;
    out.iterations = it;
    if (!std::isfinite(r)) break;
    if (r <= options.tol * (1.0 + z.lpNorm<Eigen::Infinity>())) {
      out.status = EndemicStatus::Converged;
      break;
    }
    z = (1.0 - options.damping) * z + options.damping * f;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      if (z[i] < kIterateFloor) {
        z[i] = kIterateFloor;
        ++out.floor_projections;
      }
    }
    out.iterations = it + 1;
  }

  out.z_star = z;
  if (out.status == EndemicStatus::Converged && z.lpNorm<Eigen::Infinity>() <= options.collapse_tol) {
    out.status = EndemicStatus::Collapsed;
  }
  if (!z.allFinite()) return out;

  out.x_star = sys.susceptible(z);
  out.y_star = sys.infected(z, out.x_star);
  const auto n = sys.size();
  out.state = MetapopState(out.x_star, out.y_star.segment(0, n), out.y_star.segment(n, n),
                           out.y_star.segment(2 * n, n));
  if ((z.array() > 0.0).all()) out.h_value = h_function(z, sys);

  if (out.state.nonnegative()) {
    const MetapopState f = rhs_uncorrelated_mass(out.state, sys.params(), sys.dist(), false);
    const double scale = std::max(sys.params().lambda, out.state.flat().lpNorm<Eigen::Infinity>());
    out.rhs_residual = f.flat().lpNorm<Eigen::Infinity>() / scale;
    out.rhs_ok = out.rhs_residual <= options.rhs_tol;
  } else {
    out.rhs_residual = std::numeric_limits<double>::infinity();
  }
  return out;
}

std::vector<EndemicSolution> multi_start_scan(const Params& p, const DegreeDistribution& dist,
                                              int starts, std::uint64_t seed,
                                              const EndemicOptions& options) {
  if (starts < 1) throw ValidationError("starts must be at least 1");
  const EndemicSystem sys(p, dist);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> expo(-4.0, 0.0);
  const double scale = std::max(p.beta * p.lambda / p.mu, 1e-12);

  std::vector<EndemicSolution> found;
  for (int s = 0; s < starts; ++s) {
    Vector init(sys.size());
    for (Eigen::Index i = 0; i < init.size(); ++i) init[i] = scale * std::pow(10.0, expo(rng));
    EndemicSolution sol = solve_endemic(sys, init, options);
    if (!sol.endemic()) continue;
    const bool duplicate = std::any_of(found.begin(), found.end(), [&](const EndemicSolution& other) {
      const double ref = std::max(other.z_star.lpNorm<Eigen::Infinity>(), sol.z_star.lpNorm<Eigen::Infinity>());
      return (other.z_star - sol.z_star).lpNorm<Eigen::Infinity>() <= 1e-6 * ref;
    });
    if (!duplicate) found.push_back(std::move(sol));
  }
  std::stable_sort(found.begin(), found.end(), [](const EndemicSolution& a, const EndemicSolution& b) {
    return a.z_star.norm() < b.z_star.norm();
  });
  return found;
}

std::vector<HCurvePoint> h_curve(const Params& p, const DegreeDistribution& dist, double c_min,
                                 double c_max, int steps) {
  if (!(c_min > 0.0) || !(c_max > c_min) || steps < 2) {
    throw ValidationError("H-curve needs 0 < c_min < c_max and at least 2 steps");
  }
  const EndemicSystem sys(p, dist);
  std::vector<HCurvePoint> out;
  out.reserve(static_cast<std::size_t>(steps));
  const double lo = std::log10(c_min), hi = std::log10(c_max);
  for (int s = 0; s < steps; ++s) {
    const double c = std::pow(10.0, lo + (hi - lo) * s / (steps - 1));
    out.push_back({c, h_function(Vector::Constant(sys.size(), c), sys)});
  }
  return out;
}

}  // namespace tbmeta
