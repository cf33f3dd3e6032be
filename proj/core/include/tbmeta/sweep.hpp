#pragma once

#include "tbmeta/dynamics.hpp"
#include "tbmeta/integrate.hpp"
#include "tbmeta/netgen.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tbmeta {

/// DFE with a fraction of each class moved from S to I. With a seed, the per-class fraction
/// is multiplied by an independent U(0.5, 1.5) factor.
MetapopState perturbed_dfe(const Params& p, const DegreeDistribution& dist, double fraction = 0.01,
                           std::optional<std::uint64_t> seed = std::nullopt);

struct DegreePrevalence {
  int k;
  double prevalence;  // rho_I,k / rho_k, 0 for an empty class
};

std::vector<DegreePrevalence> prevalence_by_degree(const MetapopState& state, const DegreeDistribution& dist);
/// Uses the sample nearest to `at`. Throws ValidationError on an empty trajectory or a time outside the span.
std::vector<DegreePrevalence> prevalence_by_degree(const Trajectory& traj, const DegreeDistribution& dist,
                                                   double at);

struct SweepAxis {
  std::string name;  // a Params field, or "k_max"
  double min = 0.0;
  double max = 1.0;
  int steps = 2;
  bool log = false;

  std::vector<double> values() const;
};

/// "name:min:max:steps[:log]"
SweepAxis parse_axis(const std::string& text);

struct PowerLawSpec {
  double exponent = 3.0;
  int k_min = 3;
  int k_max = 100;
};

struct SweepSpec {
  SweepAxis x;
  SweepAxis y;
  IncidenceKind kind = IncidenceKind::StandardIncidence;
  Params base;
  PowerLawSpec network;                     // used whenever k_max is an axis
  std::optional<DegreeDistribution> fixed;  // otherwise this network, if given
  double check_fraction = 0.05;             // share of cells cross-checked against rho(F V^-1)
  std::uint64_t seed = 0;

  void validate() const;
};

struct SweepCell {
  double x = 0.0, y = 0.0;
  bool valid = true;
  std::string error;
  double r0 = 0.0;          // eigenspace-split value (authoritative for contours)
  double r0_printed = 0.0;  // printed closed form (NaN when its chain degenerates)
  std::optional<double> r0_numeric;
  double mean_degree = 0.0;
};

struct ContourEdge {
  std::size_t a, b;  // cell indices with R0 on opposite sides of 1
};

struct SweepResult {
  std::size_t nx = 0, ny = 0;
  std::vector<SweepCell> cells;  // index = iy * nx + ix
  std::vector<ContourEdge> contour;
  double max_check_error = 0.0;  // worst relative gap between r0 and rho(F V^-1) on checked cells
  std::size_t checked = 0;

  const SweepCell& at(std::size_t ix, std::size_t iy) const { return cells.at(iy * nx + ix); }
  /// R0 nondecreasing (direction > 0) or nonincreasing (< 0) along the axis, over valid cells.
  bool monotone_along_x(int direction, double rel_tol = 1e-12) const;
  bool monotone_along_y(int direction, double rel_tol = 1e-12) const;
};

SweepResult sweep_r0_phase(const SweepSpec& spec);

struct SettleOptions {
  double chunk = 500.0;
  double max_time = 1e5;
  double threshold = 1e-9;  // ||f||_inf / max(1, ||y||_inf)
  bool newton_polish = true;
  IntegratorControls controls{};
};

struct SettleResult {
  MetapopState state;
  double time = 0.0;
  double rhs_norm = 0.0;
  bool settled = false;
  bool polished = false;
  IntegrationStats stats;
};

/// Integrates in chunks until the scaled RHS drops below the threshold. After each chunk a
/// Newton polish is attempted; it is kept only if it lands within 1e-3 relative of the
/// integrated state and stays nonnegative.
SettleResult settle_to_steady_state(const ModelRhs& rhs, const MetapopState& start,
                                    const SettleOptions& options = {});

/// ||f(y)||_inf / max(1, ||y||_inf)
double scaled_rhs_norm(const ModelRhs& rhs, const MetapopState& state);

struct MigrationRow {
  double D;
  bool settled;
  double rhs_norm;
  double time;
  std::vector<DegreePrevalence> prevalence;
};

/// For each D (applied to all four compartments) settle from the perturbed DFE and tabulate.
std::vector<MigrationRow> sweep_migration(const std::vector<double>& d_values, const Params& base,
                                          const DegreeDistribution& dist, const ModelOptions& options,
                                          const SettleOptions& settle = {});

}  // namespace tbmeta
