#pragma once

#include "tbmeta/dynamics.hpp"
#include "tbmeta/endemic.hpp"
#include "tbmeta/integrate.hpp"
#include "tbmeta/netgen.hpp"
#include "tbmeta/ngm.hpp"
#include "tbmeta/sweep.hpp"

#include <nlohmann/json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tbmeta {

using Json = nlohmann::json;

/// Missing keys keep their defaults; unknown keys and non-numbers are errors.
/// Every problem is collected before throwing ValidationError.
Params params_from_json(const Json& j, const Params& defaults = Params::table1());
Json to_json(const Params& p);

struct NetworkConfig {
  DegreeDistribution dist;
  std::optional<MixingKernel> kernel;  // empty: uncorrelated closure

  bool uncorrelated() const noexcept { return !kernel || kernel->uncorrelated(); }
};

/// {"degrees":[...],"probs":[...],"kernel":[[...]]} or "uncorrelated":true, or
/// {"power_law":{"exponent":e,"k_min":a,"k_max":b}} as a generator shorthand.
/// A correlated kernel must pass validate_consistency.
NetworkConfig network_from_json(const Json& j);
Json to_json(const DegreeDistribution& dist, const std::optional<MixingKernel>& kernel = std::nullopt);

Json read_json_file(const std::string& path);

Json to_json(const R0Report& r);
Json to_json(const NgmCoefficients& c);
Json to_json(const EndemicSolution& s, bool with_history = false);
Json to_json(const SweepResult& r, const SweepSpec& spec);
Json to_json(const std::vector<MigrationRow>& rows);
Json to_json(const Trajectory& t, const DegreeDistribution& dist);

/// Shortest round-trip representation.
std::string format_number(double v);

void write_matrix_csv(std::ostream& os, const Matrix& m);
void write_h_curve_csv(std::ostream& os, const std::vector<HCurvePoint>& curve);
/// One row per (time, k): t,k,rho_S,rho_E,rho_I,rho_R
void write_trajectory_csv(std::ostream& os, const Trajectory& t, const DegreeDistribution& dist);
/// One row per grid cell.
void write_sweep_csv(std::ostream& os, const SweepResult& r, const SweepSpec& spec);
/// One row per (D, k).
void write_migration_csv(std::ostream& os, const std::vector<MigrationRow>& rows);

}  // namespace tbmeta
