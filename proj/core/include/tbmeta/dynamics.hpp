#pragma once

#include "tbmeta/netgen.hpp"
#include "tbmeta/numeric.hpp"
#include "tbmeta/ode.hpp"

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tbmeta {

/// Rate constants of the model. Units are per year unless noted.
struct Params {
  double lambda = 1001.0;      ///< recruitment, individuals / year
  double beta = 0.0017;        ///< transmission coefficient
  double mu = 0.017;           ///< natural death rate
  double q = 0.015;            ///< fast-progression fraction (dimensionless)
  double alpha = 0.0024;       ///< slow progression rate
  double theta = 0.001;        ///< chemoprophylaxis effectiveness (dimensionless)
  double delta = 0.7372;       ///< treatment recovery rate of infectious
  double eta = 0.2;            ///< chemoprophylaxis recovery rate (repo default, not a literature value)
  double gamma = 0.7372 / 4.0; ///< natural recovery rate of infectious
  double d = 0.0012;           ///< disease-induced death rate
  double xi = 0.0986;          ///< relapse rate; also enters re-infection as (1 - xi)
  double D_S = 1.0;
  double D_E = 1.0;
  double D_I = 1.0;
  double D_R = 1.0;

  /// The literature baseline (beta defaults to 0.0017 and all diffusion rates to 1).
  static Params table1() { return {}; }

  /// Effective slow progression alpha (1 - theta).
  double progression() const noexcept { return alpha * (1.0 - theta); }
  double removal_E() const noexcept { return mu + eta + progression() + D_E; }  ///< A_E
  double removal_I() const noexcept { return mu + d + gamma + delta + D_I; }    ///< A_I
  double removal_R() const noexcept { return mu + xi + D_R; }                   ///< A_R

  /// Sets every diffusion rate to the same value.
  Params with_diffusion(double D) const;

  /// Every violated constraint, one message per field. Empty when valid.
  std::vector<std::string> violations() const;
  /// Throws ValidationError listing all violations.
  void validate() const;

  /// Field access by symbol name (lambda, beta, mu, ..., D_S, D_E, D_I, D_R).
  static const std::array<std::string_view, 15>& names();
  double get(std::string_view name) const;
  void set(std::string_view name, double value);
};

enum class IncidenceKind { StandardIncidence, MassAction };

std::string_view to_string(IncidenceKind kind);
IncidenceKind parse_incidence(std::string_view text);

/// Which variant of the right-hand side to evaluate.
struct ModelOptions {
  IncidenceKind incidence = IncidenceKind::StandardIncidence;
  /// Recovered individuals re-enter E at rate beta (1 - xi) times the force of infection.
  bool reinfection = true;
};

/// Per-degree-class densities. Totals are always derived, never stored.
struct MetapopState {
  Vector S, E, I, R;

  MetapopState() = default;
  explicit MetapopState(Eigen::Index n);
  MetapopState(Vector s, Vector e, Vector i, Vector r);

  Eigen::Index size() const noexcept { return S.size(); }
  /// rho_k = S_k + E_k + I_k + R_k
  Vector total() const { return S + E + I + R; }

  /// Packed [S; E; I; R].
  Vector flat() const;
  static MetapopState from_flat(const Vector& y);

  bool nonnegative() const;
};

struct Aggregates {
  double S, E, I, R, total;
};

/// rho_X = sum_k p(k) rho_{X,k}, compensated.
Aggregates aggregate(const MetapopState& state, const DegreeDistribution& dist);

struct InvariantCheck {
  bool inside;
  double min_entry;
  double aggregate_total;
  double bound;   ///< Lambda / mu
  double margin;  ///< bound (1 + 1e-6) - aggregate_total; negative when violated
};

/// All entries >= 0 and aggregated rho <= Lambda/mu (1 + 1e-6).
InvariantCheck check_invariant_region(const MetapopState& state, const DegreeDistribution& dist,
                                      const Params& p);

/// General kernel: diffusion k D_X sum_k' P(k'|k) rho_{X,k'} / k' - D_X rho_{X,k}.
MetapopState rhs_general(const MetapopState& state, const Params& p, const DegreeDistribution& dist,
                         const MixingKernel& kernel, const ModelOptions& options);

/// Uncorrelated closure, standard incidence: diffusion -D_X (rho_{X,k} - k/<k> rho_X).
MetapopState rhs_uncorrelated_freq(const MetapopState& state, const Params& p,
                                   const DegreeDistribution& dist, bool reinfection = true);

/// Uncorrelated closure, mass action.
MetapopState rhs_uncorrelated_mass(const MetapopState& state, const Params& p,
                                   const DegreeDistribution& dist, bool reinfection = true);

/// Dispatches to one of the uncorrelated right-hand sides.
MetapopState rhs_uncorrelated(const MetapopState& state, const Params& p,
                              const DegreeDistribution& dist, const ModelOptions& options);

/// Analytic 4n x 4n Jacobian of the right-hand side, in packed [S; E; I; R] order.
/// The connectivity matrix C selects the network (uncorrelated_connectivity for the closure).
Matrix rhs_jacobian(const MetapopState& state, const Params& p, const Matrix& connectivity,
                    const ModelOptions& options);

/// Right-hand side on a fixed network, in the packed layout the integrator uses.
class ModelRhs final : public OdeSystem {
 public:
  /// Uncorrelated closure.
  ModelRhs(Params p, DegreeDistribution dist, ModelOptions options);
  /// General kernel.
  ModelRhs(Params p, DegreeDistribution dist, MixingKernel kernel, ModelOptions options);

  Eigen::Index dimension() const override { return 4 * static_cast<Eigen::Index>(dist_.size()); }
  /// No sign check on y: explicit stages may dip marginally below zero.
  void evaluate(const Vector& y, Vector& dydt) const override;
  Matrix jacobian(const Vector& y) const override;
  /// Same as evaluate, on an unpacked state.
  MetapopState derivative(const MetapopState& x) const;

  const Params& params() const noexcept { return p_; }
  const DegreeDistribution& dist() const noexcept { return dist_; }
  const ModelOptions& options() const noexcept { return options_; }
  const Matrix& connectivity() const noexcept { return c_; }

 private:
  Params p_;
  DegreeDistribution dist_;
  std::optional<MixingKernel> kernel_;
  ModelOptions options_;
  Matrix c_;
};

}  // namespace tbmeta
